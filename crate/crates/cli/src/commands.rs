use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde_json::json;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use speccoh::estimate::{
    mean_periodogram, nw_detrend, periodogram as replicate_periodogram, replicate_coherence,
    smooth, standardize_anomalies, Averaging, CoherenceSummary, Pairing, SmoothingKernel,
};
use speccoh::fit::{fit_matern_cross, fit_matern_marginal, FitConfig, FitResult, RadialTarget};
use speccoh::grid::io::{read_field_csv, read_field_from};
use speccoh::models::{
    pair_phase_gain, MaternParams, ModelSpec, SpectralModel, Validity, ValidityBudget,
};
use speccoh::simulate::{filtered_correlation, simulate as run_simulation, Method, SimRequest};
use speccoh::{EstimateError, FieldError, FitError, GridSpec, ModelError, MultiField, SimError};

use crate::args::KernelSpec;
use crate::{
    CoherenceArgs, FilterArgs, FitArgs, ModelCurveArgs, PeriodogramArgs, Preprocess, SimulateArgs,
    ValidateArgs,
};

/// An error that carries its own exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }

    fn invalid_model(msg: impl Into<String>) -> Self {
        Self {
            code: 3,
            msg: msg.into(),
        }
    }

    fn numerical(msg: impl Into<String>) -> Self {
        Self {
            code: 4,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Failure {}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Invalid(_)
        | ModelError::InvalidParameter(_)
        | ModelError::NotPositiveDefinite(_) => 3,
        ModelError::UndefinedGain | ModelError::UndefinedTransfer => 4,
        ModelError::Json(_) => 2,
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return model_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SimError>() {
            return match e {
                SimError::Model(m) => model_code(m),
                SimError::EmbeddingFailed | SimError::Factorization => 4,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<FitError>() {
            return match e {
                FitError::NonPositivePeriodogram { .. } => 4,
                _ => 2,
            };
        }
        if cause.is::<EstimateError>() || cause.is::<FieldError>() || cause.is::<io::Error>() {
            return 2;
        }
    }
    2
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Dense,
    Circulant,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AveragingArg {
    /// Mean of per-replicate squared coherences.
    Coherence,
    /// Coherence of the replicate-averaged spectra.
    Spectra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Marginal,
    Cross,
}

fn write_output(
    out: &Option<PathBuf>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<ModelSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ModelSpec::from_json(&text).with_context(|| format!("model {}", path.display()))
}

fn require_valid(model: &ModelSpec) -> Result<()> {
    match model.validity(&ValidityBudget::default()) {
        Validity::Valid => Ok(()),
        Validity::Invalid(v) => Err(Failure::invalid_model(format!("invalid model: {v}")).into()),
    }
}

fn grid_spec(sizes: &[usize], spacing: &[f64]) -> Result<GridSpec> {
    let spacing = match spacing {
        [d] => vec![*d; sizes.len()],
        s if s.len() == sizes.len() => s.to_vec(),
        s => bail!(Failure::usage(format!(
            "--spacing has {} values for a {}-d grid",
            s.len(),
            sizes.len()
        ))),
    };
    Ok(GridSpec::new(sizes.to_vec(), spacing)?)
}

fn check_var(index: usize, nvars: usize) -> Result<()> {
    if index >= nvars {
        bail!(Failure::usage(format!(
            "variable {index} out of range for {nvars} variables"
        )));
    }
    Ok(())
}

fn first_line(path: &Path) -> Result<String> {
    let mut line = Vec::new();
    BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?)
        .take(4096)
        .read_until(b'\n', &mut line)?;
    Ok(String::from_utf8_lossy(&line).trim().to_string())
}

/// An MFLD1 file, or a CSV field with a `rep,var,...` header.
fn load_field(path: &Path, spacing: Option<&[f64]>) -> Result<MultiField> {
    let head = first_line(path)?;
    let field = if head.starts_with('{') {
        read_field_from(BufReader::new(File::open(path)?))
    } else {
        read_field_csv(path, spacing)
    };
    field.with_context(|| format!("reading field {}", path.display()))
}

fn preprocess(field: MultiField, pre: &Preprocess) -> Result<MultiField> {
    let mut field = field;
    if let Some(bw) = pre.detrend {
        field = nw_detrend(&field, bw)?;
    }
    if pre.standardize {
        field = standardize_anomalies(&field)?;
    }
    Ok(field)
}

fn smoothing_kernel(spec: &KernelSpec, dims: usize) -> Result<SmoothingKernel> {
    Ok(match spec {
        KernelSpec::Box3 => SmoothingKernel::boxcar(dims, 3)?,
        KernelSpec::Custom(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading kernel {}", path.display()))?;
            SmoothingKernel::parse(&text)?
        }
    })
}

pub fn model_curve(a: ModelCurveArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    require_valid(&model)?;
    let (k, l) = a.pair;
    check_var(k.max(l), model.nvars())?;
    if !(a.rmin > 0.0 && a.rmax > a.rmin && a.points >= 2) {
        bail!(Failure::usage("need 0 < rmin < rmax and at least 2 points"));
    }
    let (lo, hi) = (a.rmin.log10(), a.rmax.log10());
    let step = (hi - lo) / (a.points - 1) as f64;
    let mut omega = vec![0.0; model.dim()];
    write_output(&a.out, |w| {
        writeln!(w, "r,coh2,abs_coh,phase,gain")?;
        for i in 0..a.points {
            let r = 10f64.powf(lo + step * i as f64);
            omega[0] = r;
            let ps = model.spectral_matrix(&omega).pair(k, l);
            let (gain, phase) = pair_phase_gain(&ps).unwrap_or((0.0, 0.0));
            writeln!(
                w,
                "{r:.17e},{:.17e},{:.17e},{phase:.17e},{gain:.17e}",
                ps.coherence2(),
                ps.abs_coherence()
            )?;
        }
        Ok(())
    })
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    require_valid(&model)?;
    let grid = grid_spec(&a.grid.grid, &a.grid.spacing)?;
    let field = run_simulation(&SimRequest {
        model: &model,
        grid,
        reps: a.grid.reps,
        seed: a.grid.seed,
        method: match a.method {
            MethodArg::Dense => Method::Dense,
            MethodArg::Circulant => Method::Circulant,
        },
    })?;
    speccoh::grid::io::write_field(&field, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

pub fn periodogram(a: PeriodogramArgs) -> Result<()> {
    let field = load_field(&a.input, a.spacing.as_deref())?;
    let pg = match a.rep {
        Some(r) => replicate_periodogram(&field, r)?,
        None => mean_periodogram(&field)?,
    };
    let pg = match &a.kernel {
        Some(spec) => smooth(&pg, &smoothing_kernel(spec, field.grid().dims())?)?,
        None => pg,
    };
    write_output(&a.out, |w| pg.write_csv(w))
}

fn pairing(reps: usize, lag: i64) -> Result<Pairing> {
    let p = if lag == 0 {
        Pairing::same(reps)
    } else {
        Pairing::lagged(reps, lag)
    };
    if p.pairs().is_empty() {
        bail!(Failure::usage(format!(
            "lag {lag} leaves no replicate pairs among {reps} replicates"
        )));
    }
    Ok(p)
}

fn estimate_coherence(
    field: &MultiField,
    (k, l): (usize, usize),
    lag: i64,
    kernel: &SmoothingKernel,
    averaging: Averaging,
) -> Result<CoherenceSummary> {
    check_var(k.max(l), field.nvars())?;
    Ok(replicate_coherence(
        field,
        &pairing(field.reps(), lag)?,
        k,
        l,
        kernel,
        averaging,
    )?)
}

pub fn coherence(a: CoherenceArgs) -> Result<()> {
    let field = preprocess(load_field(&a.input, a.spacing.as_deref())?, &a.pre)?;
    let kernel = smoothing_kernel(&a.kernel, field.grid().dims())?;
    let averaging = match a.averaging {
        AveragingArg::Coherence => Averaging::Coherence,
        AveragingArg::Spectra => Averaging::Spectra,
    };
    let summary = estimate_coherence(&field, a.pair, a.lag, &kernel, averaging)?;
    write_output(&a.out, |w| summary.write_csv(w))
}

/// Columns of a header line, trimmed and lowercased.
fn columns(line: &str) -> Vec<String> {
    line.split(',').map(|c| c.trim().to_lowercase()).collect()
}

fn parse_row(line: &str, ncols: usize, lineno: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::usage(format!("line {lineno}: {e}")))?;
    if vals.len() != ncols {
        bail!(Failure::usage(format!(
            "line {lineno}: expected {ncols} columns, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Radial target from a periodogram CSV (`w1..wd,k,l,re,im`), diagonal `var`.
fn target_from_periodogram_csv(path: &Path, cols: &[String], var: usize) -> Result<RadialTarget> {
    let d = cols.len() - 4;
    let mut t = RadialTarget {
        dim: d,
        radii: vec![],
        values: vec![],
        in_phase: None,
    };
    let mut seen_var = false;
    for (n, line) in BufReader::new(File::open(path)?)
        .lines()
        .enumerate()
        .skip(1)
    {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_row(&line, cols.len(), n + 1)?;
        let (k, l) = (v[d] as usize, v[d + 1] as usize);
        if k == var && l == var {
            seen_var = true;
            t.radii
                .push(v[..d].iter().map(|x| x * x).sum::<f64>().sqrt());
            t.values.push(v[d + 2]);
        }
    }
    if !seen_var {
        bail!(Failure::usage(format!(
            "no diagonal entries for variable {var} in {}",
            path.display()
        )));
    }
    Ok(t)
}

/// Radial target from a coherence CSV (`w1..wd,coh2,abs_coh,phase,gain`).
fn target_from_coherence_csv(path: &Path, cols: &[String]) -> Result<RadialTarget> {
    let d = cols.len() - 4;
    let mut t = RadialTarget {
        dim: d,
        radii: vec![],
        values: vec![],
        in_phase: Some(vec![]),
    };
    for (n, line) in BufReader::new(File::open(path)?)
        .lines()
        .enumerate()
        .skip(1)
    {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_row(&line, cols.len(), n + 1)?;
        t.radii
            .push(v[..d].iter().map(|x| x * x).sum::<f64>().sqrt());
        t.values.push(v[d]);
        if let Some(p) = t.in_phase.as_mut() {
            p.push(v[d + 3] * v[d + 2].cos());
        }
    }
    Ok(t)
}

enum FitInput {
    Field(MultiField),
    Periodogram(Vec<String>),
    Coherence(Vec<String>),
}

fn fit_input(a: &FitArgs) -> Result<FitInput> {
    let head = first_line(&a.input)?;
    let cols = columns(&head);
    let tail: Vec<&str> = cols
        .iter()
        .rev()
        .take(4)
        .rev()
        .map(String::as_str)
        .collect();
    let is_lattice = cols.len() > 4
        && cols[..cols.len() - 4]
            .iter()
            .enumerate()
            .all(|(i, c)| *c == format!("w{}", i + 1));
    if is_lattice && tail == ["k", "l", "re", "im"] {
        Ok(FitInput::Periodogram(cols))
    } else if is_lattice && tail == ["coh2", "abs_coh", "phase", "gain"] {
        Ok(FitInput::Coherence(cols))
    } else {
        Ok(FitInput::Field(preprocess(
            load_field(&a.input, a.spacing.as_deref())?,
            &a.pre,
        )?))
    }
}

fn fit_config(a: &FitArgs, target: &RadialTarget) -> FitConfig {
    FitConfig {
        band: a.band.map(|(lo, hi)| {
            let rmax = target.radii.iter().copied().fold(0.0, f64::max);
            (lo.unwrap_or(0.0), hi.unwrap_or(rmax))
        }),
        profile_sigma2: !a.joint_sigma2,
        ..FitConfig::default()
    }
}

fn marginal_params(fit: &FitResult) -> Result<MaternParams> {
    let get = |k: &str| {
        fit.get(k)
            .ok_or_else(|| Failure::numerical(format!("marginal fit lacks {k}")))
    };
    Ok(MaternParams::new(get("sigma2")?, get("nu")?, get("a")?)?)
}

fn fit_marginals(
    field: &MultiField,
    vars: &[usize],
    kernel: &SmoothingKernel,
    a: &FitArgs,
) -> Result<Vec<FitResult>> {
    let pg = smooth(&mean_periodogram(field)?, kernel)?;
    vars.iter()
        .map(|&v| {
            check_var(v, field.nvars())?;
            let t = RadialTarget::from_periodogram(&pg, v)?;
            Ok(fit_matern_marginal(&t, &fit_config(a, &t))?)
        })
        .collect()
}

fn write_table(w: &mut dyn Write, fits: &[(i64, FitResult)]) -> io::Result<()> {
    writeln!(w, "{:>5} {:>12} {:>12} {:>12}", "lag", "rho", "a12", "nu12")?;
    for (lag, f) in fits {
        let g = |k: &str| f.get(k).unwrap_or(f64::NAN);
        writeln!(
            w,
            "{lag:>5} {:>12.6} {:>12.6} {:>12.6}",
            g("rho"),
            g("a12"),
            g("nu12")
        )?;
    }
    Ok(())
}

fn report_convergence<'a>(fits: impl IntoIterator<Item = &'a FitResult>) -> Result<()> {
    if fits.into_iter().any(|f| !f.converged) {
        bail!(Failure::numerical(
            "optimizer did not converge (results written)"
        ));
    }
    Ok(())
}

pub fn fit(a: FitArgs) -> Result<()> {
    let input = fit_input(&a)?;
    let dims = |f: &MultiField| f.grid().dims();
    match a.stage {
        Stage::Marginal => {
            let fits: Vec<(usize, FitResult)> = match &input {
                FitInput::Field(field) => {
                    let vars = a
                        .vars
                        .clone()
                        .unwrap_or_else(|| (0..field.nvars()).collect());
                    let kernel = smoothing_kernel(&a.kernel, dims(field))?;
                    vars.iter()
                        .copied()
                        .zip(fit_marginals(field, &vars, &kernel, &a)?)
                        .collect()
                }
                FitInput::Periodogram(cols) => {
                    let vars = a.vars.clone().unwrap_or_else(|| vec![0]);
                    vars.iter()
                        .map(|&v| {
                            let t = target_from_periodogram_csv(&a.input, cols, v)?;
                            Ok((v, fit_matern_marginal(&t, &fit_config(&a, &t))?))
                        })
                        .collect::<Result<_>>()?
                }
                FitInput::Coherence(_) => bail!(Failure::usage(
                    "marginal fits need a field or a periodogram CSV"
                )),
            };
            let doc = json!({
                "stage": "marginal",
                "fits": fits.iter().map(|(v, f)| json!({"var": v, "result": f})).collect::<Vec<_>>(),
            });
            let text = serde_json::to_string_pretty(&doc)?;
            write_output(&a.out, |w| writeln!(w, "{text}"))?;
            report_convergence(fits.iter().map(|(_, f)| f))
        }
        Stage::Cross => {
            let (k, l) = a.pair;
            let (marginals, fits): (Vec<MaternParams>, Vec<(i64, FitResult)>) = match &input {
                FitInput::Field(field) => {
                    check_var(k.max(l), field.nvars())?;
                    let kernel = smoothing_kernel(&a.kernel, dims(field))?;
                    let m = match &a.marginals {
                        Some(m) => fixed_marginals(m)?,
                        None => fit_marginals(field, &[k, l], &kernel, &a)?
                            .iter()
                            .map(marginal_params)
                            .collect::<Result<_>>()?,
                    };
                    let fits = a
                        .lag
                        .iter()
                        .map(|&lag| {
                            let coh = estimate_coherence(
                                field,
                                (k, l),
                                lag,
                                &kernel,
                                Averaging::Coherence,
                            )?;
                            let t = RadialTarget::from_coherence(&coh);
                            Ok((
                                lag,
                                fit_matern_cross(&t, (m[0], m[1]), &fit_config(&a, &t))?,
                            ))
                        })
                        .collect::<Result<_>>()?;
                    (m, fits)
                }
                FitInput::Coherence(cols) => {
                    let m = match &a.marginals {
                        Some(m) => fixed_marginals(m)?,
                        None => bail!(Failure::usage(
                            "cross fits from a coherence CSV need --marginals nu:a,nu:a"
                        )),
                    };
                    let t = target_from_coherence_csv(&a.input, cols)?;
                    let fit = fit_matern_cross(&t, (m[0], m[1]), &fit_config(&a, &t))?;
                    (m, vec![(a.lag[0], fit)])
                }
                FitInput::Periodogram(_) => {
                    bail!(Failure::usage("cross fits need a field or a coherence CSV"))
                }
            };
            let doc = json!({
                "stage": "cross",
                "pair": [k, l],
                "marginals": marginals.iter().map(|m| json!({"sigma2": m.sigma2, "nu": m.nu, "a": m.a})).collect::<Vec<_>>(),
                "fits": fits.iter().map(|(lag, f)| json!({"lag": lag, "result": f})).collect::<Vec<_>>(),
            });
            let text = serde_json::to_string_pretty(&doc)?;
            write_output(&a.out, |w| writeln!(w, "{text}"))?;
            if a.out.is_some() {
                write_table(&mut io::stdout().lock(), &fits)?;
            } else {
                write_table(&mut io::stderr().lock(), &fits)?;
            }
            report_convergence(fits.iter().map(|(_, f)| f))
        }
    }
}

fn fixed_marginals(m: &[(f64, f64)]) -> Result<Vec<MaternParams>> {
    if m.len() != 2 {
        bail!(Failure::usage(format!(
            "--marginals needs two nu:a entries, got {}",
            m.len()
        )));
    }
    Ok(m.iter()
        .map(|&(nu, a)| MaternParams::new(1.0, nu, a))
        .collect::<Result<_, _>>()?)
}

pub fn filter_experiment(a: FilterArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    require_valid(&model)?;
    let grid = grid_spec(&a.grid, &a.spacing)?;
    let fc = filtered_correlation(&model, &grid, a.reps, a.seed)?;
    write_output(&a.out, |w| {
        writeln!(w, "filter,corr,nreps")?;
        for (name, corr) in [("raw", fc.raw), ("low", fc.low), ("high", fc.high)] {
            writeln!(w, "{name},{corr:.17e},{}", fc.nreps)?;
        }
        Ok(())
    })
}

pub fn validate_model(a: ValidateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    require_valid(&model)?;
    println!("valid");
    Ok(())
}
