//! Replayable augmentation descriptors.
//!
//! Provenance is stored as one string so manifest lines stay flat:
//!
//! ```text
//! original
//! aug source=<id> seed=<master_seed> steps=<step>[+<step>...]
//! ```
//!
//! with steps
//!
//! ```text
//! crop(x0,y0,w,h)
//! d4(r90_h)
//! color(a=a1/a2/a3,delta=d1/d2/d3)
//! warp(reg=r,src=x:y/x:y/...,dst=x:y/...,delta=d1/d2/d3/d4)
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a parsed descriptor
//! replays bit-exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometric::{BBox, D4Element, Rotation};
use crate::warp::Point;

#[derive(Debug, Clone, PartialEq)]
pub enum AugStep {
    Crop(BBox),
    D4(D4Element),
    Color {
        alphas: [f64; 3],
        delta: [f64; 3],
    },
    Warp {
        regularization: f64,
        source: Vec<Point>,
        target: Vec<Point>,
        deltas: Vec<f64>,
    },
}

impl AugStep {
    pub fn name(&self) -> &'static str {
        match self {
            AugStep::Crop(_) => "crop",
            AugStep::D4(_) => "d4",
            AugStep::Color { .. } => "color",
            AugStep::Warp { .. } => "warp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Provenance {
    #[default]
    Original,
    Augmented {
        source: String,
        master_seed: u64,
        steps: Vec<AugStep>,
    },
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        matches!(self, Provenance::Original)
    }

    /// Id of the record this one was derived from, if any.
    pub fn source(&self) -> Option<&str> {
        match self {
            Provenance::Original => None,
            Provenance::Augmented { source, .. } => Some(source),
        }
    }
}

fn join<T: fmt::Display>(xs: &[T], sep: &str) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn points(ps: &[Point]) -> String {
    ps.iter().map(|p| format!("{}:{}", p[0], p[1])).collect::<Vec<_>>().join("/")
}

impl fmt::Display for AugStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugStep::Crop(b) => write!(f, "crop({},{},{},{})", b.x0, b.y0, b.w, b.h),
            AugStep::D4(g) => write!(f, "d4({g})"),
            AugStep::Color { alphas, delta } => {
                write!(f, "color(a={},delta={})", join(alphas, "/"), join(delta, "/"))
            }
            AugStep::Warp {
                regularization,
                source,
                target,
                deltas,
            } => write!(
                f,
                "warp(reg={regularization},src={},dst={},delta={})",
                points(source),
                points(target),
                join(deltas, "/")
            ),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original => f.write_str("original"),
            Provenance::Augmented {
                source,
                master_seed,
                steps,
            } => write!(f, "aug source={source} seed={master_seed} steps={}", join(steps, "+")),
        }
    }
}

impl From<Provenance> for String {
    fn from(p: Provenance) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Provenance {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn parse_floats(s: &str, n: Option<usize>) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = if s.is_empty() {
        Vec::new()
    } else {
        s.split('/')
            .map(|t| t.parse::<f64>().map_err(|_| format!("bad number {t:?}")))
            .collect::<Result<_, _>>()?
    };
    match n {
        Some(n) if v.len() != n => Err(format!("expected {n} numbers in {s:?}")),
        _ => Ok(v),
    }
}

fn parse_points(s: &str) -> Result<Vec<Point>, String> {
    s.split('/')
        .map(|p| {
            let (x, y) = p.split_once(':').ok_or_else(|| format!("bad point {p:?}"))?;
            Ok([
                x.parse().map_err(|_| format!("bad coordinate {x:?}"))?,
                y.parse().map_err(|_| format!("bad coordinate {y:?}"))?,
            ])
        })
        .collect()
}

fn key_values(body: &str) -> Result<Vec<(&str, &str)>, String> {
    body.split(',')
        .map(|kv| kv.split_once('=').ok_or_else(|| format!("expected key=value, got {kv:?}")))
        .collect()
}

fn lookup<'a>(kvs: &[(&'a str, &'a str)], key: &str) -> Result<&'a str, String> {
    kvs.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| format!("missing {key}"))
}

fn parse_d4(s: &str) -> Result<D4Element, String> {
    let (rot, hflip) = match s.strip_suffix("_h") {
        Some(r) => (r, true),
        None => (s, false),
    };
    let deg: u32 = rot
        .strip_prefix('r')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| format!("bad d4 element {s:?}"))?;
    let rotation = Rotation::from_degrees(deg).ok_or_else(|| format!("bad rotation {deg}"))?;
    Ok(D4Element::new(rotation, hflip))
}

impl FromStr for AugStep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s.split_once('(').ok_or_else(|| format!("bad step {s:?}"))?;
        let body = rest.strip_suffix(')').ok_or_else(|| format!("unterminated step {s:?}"))?;
        match name {
            "crop" => {
                let v: Vec<u32> = body
                    .split(',')
                    .map(|t| t.parse().map_err(|_| format!("bad crop value {t:?}")))
                    .collect::<Result<_, _>>()?;
                match v[..] {
                    [x0, y0, w, h] => Ok(AugStep::Crop(BBox::new(x0, y0, w, h))),
                    _ => Err(format!("crop needs 4 values, got {}", v.len())),
                }
            }
            "d4" => Ok(AugStep::D4(parse_d4(body)?)),
            "color" => {
                let kv = key_values(body)?;
                let a = parse_floats(lookup(&kv, "a")?, Some(3))?;
                let d = parse_floats(lookup(&kv, "delta")?, Some(3))?;
                Ok(AugStep::Color {
                    alphas: [a[0], a[1], a[2]],
                    delta: [d[0], d[1], d[2]],
                })
            }
            "warp" => {
                let kv = key_values(body)?;
                let regularization = lookup(&kv, "reg")?.parse().map_err(|_| "bad reg".to_string())?;
                let source = parse_points(lookup(&kv, "src")?)?;
                let target = parse_points(lookup(&kv, "dst")?)?;
                if source.len() != target.len() {
                    return Err("src/dst length mismatch".into());
                }
                let deltas = parse_floats(lookup(&kv, "delta")?, None)?;
                Ok(AugStep::Warp {
                    regularization,
                    source,
                    target,
                    deltas,
                })
            }
            other => Err(format!("unknown step {other:?}")),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "original" {
            return Ok(Provenance::Original);
        }
        let rest = s.strip_prefix("aug ").ok_or_else(|| format!("bad provenance {s:?}"))?;
        let mut source = None;
        let mut seed = None;
        let mut steps = None;
        for tok in rest.split(' ') {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad provenance field {tok:?}"))?;
            match k {
                "source" => source = Some(v.to_string()),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| format!("bad seed {v:?}"))?),
                "steps" => {
                    steps = Some(
                        v.split('+')
                            .filter(|t| !t.is_empty())
                            .map(str::parse)
                            .collect::<Result<Vec<AugStep>, _>>()?,
                    )
                }
                other => return Err(format!("unknown provenance field {other:?}")),
            }
        }
        Ok(Provenance::Augmented {
            source: source.ok_or("missing source")?,
            master_seed: seed.ok_or("missing seed")?,
            steps: steps.ok_or("missing steps")?,
        })
    }
}
