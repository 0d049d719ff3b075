//! Parsers for the compact flag syntaxes (`n1,n2`, `rmin:rmax`, `nw:bw`, ...).

use std::path::PathBuf;

pub fn usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

pub fn f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

pub fn i64_list(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

pub fn pair(s: &str) -> Result<(usize, usize), String> {
    match usize_list(s)?.as_slice() {
        [k, l] => Ok((*k, *l)),
        _ => Err(format!("expected two indices k,l, got {s:?}")),
    }
}

/// `rmin:rmax`; either side may be empty.
pub fn band(s: &str) -> Result<(Option<f64>, Option<f64>), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected rmin:rmax, got {s:?}"))?;
    let side = |t: &str| -> Result<Option<f64>, String> {
        if t.trim().is_empty() {
            Ok(None)
        } else {
            t.trim()
                .parse()
                .map(Some)
                .map_err(|e| format!("{t:?}: {e}"))
        }
    };
    Ok((side(lo)?, side(hi)?))
}

/// `nw:bw`, bandwidth in replicate units; `inf` allowed.
pub fn detrend(s: &str) -> Result<f64, String> {
    match s.split_once(':') {
        Some(("nw", bw)) => {
            let bw: f64 = bw.trim().parse().map_err(|e| format!("{bw:?}: {e}"))?;
            if bw > 0.0 {
                Ok(bw)
            } else {
                Err(format!("bandwidth must be positive, got {bw}"))
            }
        }
        _ => Err(format!("expected nw:<bandwidth>, got {s:?}")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Box3,
    Custom(PathBuf),
}

pub fn kernel(s: &str) -> Result<KernelSpec, String> {
    if s == "box3" {
        Ok(KernelSpec::Box3)
    } else if let Some(path) = s.strip_prefix("custom:") {
        Ok(KernelSpec::Custom(PathBuf::from(path)))
    } else {
        Err(format!("expected box3 or custom:<file>, got {s:?}"))
    }
}

/// `nu:a` per variable, comma separated.
pub fn marginals(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|t| {
            let (nu, a) = t
                .split_once(':')
                .ok_or_else(|| format!("expected nu:a, got {t:?}"))?;
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
            Ok((parse(nu)?, parse(a)?))
        })
        .collect()
}
