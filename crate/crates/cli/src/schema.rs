//! JSON inputs and the textual grid / source syntax.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use cvbell::bell::SourceState;
use cvbell::gaussian::{GaussianState, StsParams};
use cvbell::network::{from_family, Family, NetworkTopology};
use cvbell::optimize::SourceFamily;

use crate::CliError;

/// `{"kind":"epr","r":..}`, `{"kind":"sts","v1":..,"v2":..,"r":..}` or
/// `{"kind":"custom","cov":[[..],..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceSpec {
    Epr { r: f64 },
    Sts { v1: f64, v2: f64, r: f64 },
    Custom { cov: Vec<Vec<f64>> },
}

impl SourceSpec {
    pub fn state(&self) -> Result<SourceState, CliError> {
        Ok(match self {
            SourceSpec::Epr { r } => {
                cvbell::gaussian::epr_state(*r)?;
                SourceState::Epr { r: *r }
            }
            SourceSpec::Sts { v1, v2, r } => SourceState::Sts(StsParams::new(*v1, *v2, *r)?),
            SourceSpec::Custom { cov } => {
                let n = cov.len();
                if n != 4 || cov.iter().any(|row| row.len() != 4) {
                    return Err(CliError::Input(
                        "custom sources need a 4x4 covariance".into(),
                    ));
                }
                let m = DMatrix::from_fn(4, 4, |i, j| cov[i][j]);
                SourceState::Custom(GaussianState::from_covariance(m)?)
            }
        })
    }
}

/// `{"family":"chain|star|tree|cycle|custom","parties":y,"sources":[[p,q],..]}`.
///
/// Named families are rebuilt from their size; a non-empty source list must
/// then match the family's own. Trees take `"m"` and `"f"`, or infer them
/// from the root's children in `sources`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub family: Family,
    pub parties: usize,
    #[serde(default)]
    pub sources: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
}

impl TopologySpec {
    pub fn build(&self) -> Result<NetworkTopology, CliError> {
        let listed: Vec<(usize, usize)> = self.sources.iter().map(|&[p, q]| (p, q)).collect();
        let topo = match self.family {
            Family::Custom => return Ok(NetworkTopology::new(self.parties, listed)?),
            Family::Tree if self.m.is_some() || self.f.is_some() => {
                let (Some(m), Some(f)) = (self.m, self.f) else {
                    return Err(CliError::Input("tree needs both m and f".into()));
                };
                let topo = from_family(Family::Tree, &[m, f])?;
                if topo.party_count() != self.parties {
                    return Err(CliError::Input(format!(
                        "tree({m}, {f}) has {} parties, not {}",
                        topo.party_count(),
                        self.parties
                    )));
                }
                topo
            }
            Family::Tree => {
                let f = listed.iter().filter(|&&(p, _)| p == 1).count();
                let mut m = 0;
                let mut total = 0;
                while total < self.parties && f >= 2 {
                    total += f.pow(m as u32);
                    m += 1;
                }
                if f < 2 || total != self.parties {
                    return Err(CliError::Input(format!(
                        "{} parties and {} children of the root do not form a complete tree",
                        self.parties, f
                    )));
                }
                from_family(Family::Tree, &[m, f])?
            }
            family => from_family(family, &[self.parties])?,
        };
        if !listed.is_empty() && listed != topo.sources() {
            return Err(CliError::Input(format!(
                "source list does not match the {} family",
                self.family
            )));
        }
        Ok(topo)
    }
}

/// `{"sources":[{...},..]}`, one state per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesFile {
    pub sources: Vec<SourceSpec>,
}

/// `epr`, `sts:v=1.2` or `sts:v1=1.2,v2=1.5`.
pub fn parse_source_family(text: &str) -> Result<SourceFamily, String> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    match kind {
        "epr" if rest.is_empty() => Ok(SourceFamily::Epr),
        "sts" => {
            let (mut v1, mut v2) = (None, None);
            for kv in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
                let v: f64 = v.parse().map_err(|_| format!("bad number `{v}`"))?;
                match k {
                    "v" => (v1, v2) = (Some(v), Some(v)),
                    "v1" => v1 = Some(v),
                    "v2" => v2 = Some(v),
                    _ => return Err(format!("unknown sts key `{k}`")),
                }
            }
            match (v1, v2) {
                (Some(v1), Some(v2)) => {
                    StsParams::new(v1, v2, 0.0).map_err(|e| e.to_string())?;
                    Ok(SourceFamily::Sts { v1, v2 })
                }
                _ => Err("sts needs v=.. or v1=..,v2=..".into()),
            }
        }
        _ => Err(format!("unknown source `{text}`; expected epr or sts:v=..")),
    }
}

/// `a:b:step` (inclusive) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number `{s}` in `{text}`"))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let out = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(format!("range `{text}` needs a <= b and step > 0"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // rounding keeps 0.05 * 3 printing as 0.15
            (0..=n)
                .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("expected a:b:step or a comma list, got `{text}`")),
    };
    if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
        return Err(format!("empty or non-finite grid `{text}`"));
    }
    Ok(out)
}
