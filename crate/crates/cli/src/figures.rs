//! Grids behind each reproducible figure.

use serde::Serialize;

use cvbell::bell::Functional;
use cvbell::network::{canonical_independent_set, chain, cycle, star, tree, NetworkTopology};
use cvbell::optimize::{OptimizerConfig, SourceFamily, SweepSpec};

use crate::schema::parse_grid;
use crate::CliError;

pub const IDS: [&str; 9] = [
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig8", "fig9", "fig11", "fig12",
];

const UPPER_S: &str = "0,-0.2,-0.5,-0.8";
const LOWER_S: &str = "-1,-1.5,-2";
const R_LINE: &str = "0.05:3:0.05";
const R_SURFACE: &str = "0.25:5:0.25";
const STS: SourceFamily = SourceFamily::Sts { v1: 1.2, v2: 1.2 };

#[derive(Debug, Clone, Copy)]
enum Net {
    Chain3,
    Chain6,
    Star6,
    Tree32,
    Cycle5,
}

impl Net {
    fn build(self) -> cvbell::Result<NetworkTopology> {
        match self {
            Net::Chain3 => chain(3),
            Net::Chain6 => chain(6),
            Net::Star6 => star(6),
            Net::Tree32 => tree(3, 2),
            Net::Cycle5 => cycle(5),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Figure {
    pub description: &'static str,
    net: Net,
    source: SourceFamily,
    /// `true`: r1 x r2 surfaces per s; `false`: one line per branch.
    surface: bool,
}

/// Written next to the CSVs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub figure: String,
    pub description: String,
    pub seed: u64,
    pub config: OptimizerConfig,
    pub files: Vec<String>,
}

pub fn lookup(id: &str) -> Result<Figure, CliError> {
    let (description, net, source, surface) = match id {
        "fig2" => (
            "chain(3), EPR x EPR, B over (r1, r2) at s = -0.5, -1, -2",
            Net::Chain3,
            SourceFamily::Epr,
            true,
        ),
        "fig3" => (
            "chain(6), identical EPR sources, B(s, r)",
            Net::Chain6,
            SourceFamily::Epr,
            false,
        ),
        "fig4" => (
            "chain(6), identical STS(1.2, 1.2, r) sources, B(s, r)",
            Net::Chain6,
            STS,
            false,
        ),
        "fig5" => (
            "star(6), identical EPR sources, B(s, r)",
            Net::Star6,
            SourceFamily::Epr,
            false,
        ),
        "fig6" => (
            "star(6), identical STS(1.2, 1.2, r) sources, B(s, r)",
            Net::Star6,
            STS,
            false,
        ),
        "fig8" => (
            "tree(3, 2), identical EPR sources, B(s, r)",
            Net::Tree32,
            SourceFamily::Epr,
            false,
        ),
        "fig9" => (
            "tree(3, 2), identical STS(1.2, 1.2, r) sources, B(s, r)",
            Net::Tree32,
            STS,
            false,
        ),
        "fig11" => (
            "cycle(5), identical EPR sources, B(s, r)",
            Net::Cycle5,
            SourceFamily::Epr,
            false,
        ),
        "fig12" => (
            "cycle(5), identical STS(1.2, 1.2, r) sources, B(s, r)",
            Net::Cycle5,
            STS,
            false,
        ),
        _ => {
            return Err(CliError::Input(format!(
                "unknown figure `{id}`; valid ids: {}",
                IDS.join(", ")
            )))
        }
    };
    Ok(Figure {
        description,
        net,
        source,
        surface,
    })
}

impl Figure {
    /// `(file stem, grid)` per sub-figure.
    pub fn panels(&self) -> Result<Vec<(String, SweepSpec)>, CliError> {
        let topology = self.net.build()?;
        let k = canonical_independent_set(&topology)?;
        let grid = |g: &str| parse_grid(g).expect("built-in grid parses");
        let spec = |s_values: Vec<f64>, r_values: Vec<(f64, Option<f64>)>| SweepSpec {
            topology: topology.clone(),
            k: k.clone(),
            source: self.source,
            s_values,
            r_values,
            functional: Functional::Literal,
        };
        Ok(if self.surface {
            let r = grid(R_SURFACE);
            let cells: Vec<(f64, Option<f64>)> = r
                .iter()
                .flat_map(|&a| r.iter().map(move |&b| (a, Some(b))))
                .collect();
            [("a", -0.5), ("b", -1.0), ("c", -2.0)]
                .into_iter()
                .map(|(tag, s)| (format!("{tag}_s{s}"), spec(vec![s], cells.clone())))
                .collect()
        } else {
            let r: Vec<(f64, Option<f64>)> = grid(R_LINE).into_iter().map(|x| (x, None)).collect();
            vec![
                ("a_upper".to_string(), spec(grid(UPPER_S), r.clone())),
                ("b_lower".to_string(), spec(grid(LOWER_S), r)),
            ]
        })
    }
}
