use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use momentspec::comparison::SphereChoice;
use momentspec::grid_solver::{ClosedSurface, MaskSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer};

use crate::CliError;

/// Fills unset fields of `self` from a config file value.
pub trait Merge: Sized {
    fn merge(self, file: Self) -> Self;
}

#[macro_export]
macro_rules! impl_merge {
    ($ty:ty; options: $($opt:ident),* ; flags: $($flag:ident),*) => {
        impl $crate::config::Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self {
                    $($opt: self.$opt.or(file.$opt),)*
                    $($flag: self.$flag || file.$flag,)*
                    config: self.config,
                }
            }
        }
    };
}

/// Reads the optional JSON config and merges it under the command-line
/// values.
pub fn resolve<T: Merge + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T, CliError> {
    match config {
        None => Ok(args),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let file: T = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
            Ok(args.merge(file))
        }
    }
}

/// A real number, also accepting `pi`, `2pi`, `pi/3`, `2pi/3` and `-` signs.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a, b.trim().parse::<f64>().map_err(|_| format!("bad number {s:?}"))?),
        None => (t, 1.0),
    };
    let num = num.trim();
    let coef = match num.strip_suffix("pi") {
        Some("") => PI,
        Some(c) => c.trim().trim_end_matches('*').parse::<f64>().map_err(|_| format!("bad number {s:?}"))? * PI,
        None => num.parse::<f64>().map_err(|_| format!("bad number {s:?}"))?,
    };
    Ok(sign * coef / den)
}

fn reals(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(',').map(parse_real).collect::<Result<_, _>>()?;
    if v.len() != count {
        return Err(format!("expected {count} comma-separated numbers in {s:?}"));
    }
    Ok(v)
}

/// Mask given as JSON or as `cap:A,B,R`, `rect:A0,B0,A1,B1`, `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskArg(pub MaskSpec);

impl FromStr for MaskArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map(MaskArg).map_err(|e| format!("bad mask JSON: {e}"));
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("bad mask {s:?}"))?;
        let spec = match kind {
            "cap" => {
                let v = reals(rest, 3)?;
                MaskSpec::Cap { center: [v[0], v[1]], radius: v[2] }
            }
            "rect" | "rectangle" => {
                let v = reals(rest, 4)?;
                MaskSpec::Rectangle { lo: [v[0], v[1]], hi: [v[2], v[3]] }
            }
            "file" => MaskSpec::File { path: rest.into() },
            _ => return Err(format!("unknown mask kind {kind:?}")),
        };
        Ok(MaskArg(spec))
    }
}

impl<'de> Deserialize<'de> for MaskArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Spec(MaskSpec),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Spec(m) => Ok(MaskArg(m)),
        }
    }
}

/// Grid resolution `AxB` or `A,B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution(pub usize, pub usize);

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(['x', ',']).ok_or_else(|| format!("bad resolution {s:?}"))?;
        let p = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad resolution {s:?}"));
        Ok(Resolution(p(a)?, p(b)?))
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Pair([usize; 2]),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Pair([a, b]) => Ok(Resolution(a, b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Torus,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Euclidean,
    Sphere,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
pub enum SphereArg {
    #[value(name = "bbg_R", alias = "bbg-r")]
    #[serde(rename = "bbg_R", alias = "bbg-r")]
    BbgR,
    #[value(name = "sqrtK", alias = "sqrt-k")]
    #[serde(rename = "sqrtK", alias = "sqrt-k")]
    SqrtK,
}

impl From<SphereArg> for SphereChoice {
    fn from(s: SphereArg) -> Self {
        match s {
            SphereArg::BbgR => SphereChoice::BbgR,
            SphereArg::SqrtK => SphereChoice::SqrtK,
        }
    }
}

/// Builds the closed surface; missing lengths default to 1 and the
/// resolution to 128² (torus) or 128×256 (sphere).
pub fn build_surface(
    kind: SurfaceKind,
    lx: Option<f64>,
    ly: Option<f64>,
    radius: Option<f64>,
    resolution: Option<Resolution>,
) -> Result<ClosedSurface, CliError> {
    let s = match kind {
        SurfaceKind::Torus => {
            let Resolution(nx, ny) = resolution.unwrap_or(Resolution(128, 128));
            ClosedSurface::flat_torus(lx.unwrap_or(1.0), ly.unwrap_or(1.0), nx, ny)?
        }
        SurfaceKind::Sphere => {
            let Resolution(nt, np) = resolution.unwrap_or(Resolution(128, 256));
            ClosedSurface::round_sphere(radius.unwrap_or(1.0), nt, np)?
        }
    };
    Ok(s)
}
