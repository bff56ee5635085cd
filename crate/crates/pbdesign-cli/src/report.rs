//! Report structures and the three output renderings (json, csv, text).
//!
//! The JSON form is the machine-readable interface; its layout is frozen
//! under `schema_version` and guarded by golden-file tests.

use pbdesign::{BlockDesign, Criterion, PointPriors, SymMatrix};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Six-significant-digit rendering for the delimited tables.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..=9).contains(&exponent) {
        return format!("{x:.5e}");
    }
    let factor = 10f64.powi(5 - exponent);
    format!("{}", (x * factor).round() / factor)
}

#[derive(Serialize)]
pub struct PriorsReport {
    pub t: usize,
    pub b: usize,
    pub k: usize,
    pub lambda: Vec<f64>,
    pub sigma2: f64,
    pub sigmab2: f64,
    pub criterion: String,
}

impl PriorsReport {
    pub fn new(t: usize, b: usize, k: usize, priors: &PointPriors, criterion: Criterion) -> Self {
        PriorsReport {
            t,
            b,
            k,
            lambda: priors.lambda().to_vec(),
            sigma2: priors.sigma2(),
            sigmab2: priors.sigmab2(),
            criterion: criterion.to_string(),
        }
    }
}

#[derive(Serialize)]
pub struct DesignReport {
    pub alloc: Vec<Vec<u32>>,
    /// One `1^r1 2^r2 ...` string per block.
    pub block_notation: Vec<String>,
    pub block_counts: Vec<Vec<u32>>,
    pub replication_totals: Vec<u32>,
}

pub fn block_notation(counts: &[u32]) -> String {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(h, &c)| format!("{}^{}", h + 1, c))
        .collect::<Vec<_>>()
        .join(" ")
}

impl DesignReport {
    pub fn new(design: &BlockDesign) -> Self {
        let block_counts = design.block_counts();
        DesignReport {
            alloc: design.rows(),
            block_notation: block_counts.iter().map(|c| block_notation(c)).collect(),
            block_counts,
            replication_totals: design.replication_counts(),
        }
    }
}

#[derive(Serialize)]
pub struct ExhaustiveReport {
    pub classes: u64,
    pub objective: f64,
    pub agrees: bool,
}

#[derive(Serialize)]
pub struct ReferenceReport {
    pub design: Vec<Vec<u32>>,
    pub objective: f64,
    /// Efficiency of the balanced reference relative to the best design.
    pub efficiency: f64,
}

#[derive(Serialize)]
pub struct SearchReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(flatten)]
    pub priors: PriorsReport,
    pub seed: Option<u64>,
    pub restarts: Option<u32>,
    pub evaluations: u64,
    pub objective: f64,
    pub best: DesignReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exhaustive: Option<ExhaustiveReport>,
}

impl SearchReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{}: {}-optimal design for t={} b={} k={}\n",
            self.command, self.priors.criterion, self.priors.t, self.priors.b, self.priors.k
        ));
        out.push_str(&format!(
            "lambda = {:?}, sigma2 = {}, sigmab2 = {}\n",
            self.priors.lambda, self.priors.sigma2, self.priors.sigmab2
        ));
        if let Some(seed) = self.seed {
            out.push_str(&format!(
                "seed = {seed}, restarts = {}, evaluations = {}\n",
                self.restarts.unwrap_or(0),
                self.evaluations
            ));
        } else {
            out.push_str(&format!("classes evaluated = {}\n", self.evaluations));
        }
        out.push_str(&format!("objective = {}\n", sig6(self.objective)));
        out.push_str("best design (blocks):\n");
        for (row, notation) in self.best.alloc.iter().zip(&self.best.block_notation) {
            out.push_str(&format!("  {row:?}   {notation}\n"));
        }
        out.push_str(&format!(
            "replication totals = {:?}\n",
            self.best.replication_totals
        ));
        if let Some(reference) = &self.reference {
            out.push_str(&format!(
                "balanced reference objective = {}, efficiency = {}\n",
                sig6(reference.objective),
                sig6(reference.efficiency)
            ));
        }
        if let Some(ex) = &self.exhaustive {
            if ex.agrees {
                out.push_str(&format!(
                    "exhaustive check: optimum matched over {} classes\n",
                    ex.classes
                ));
            } else {
                out.push_str(&format!(
                    "WARNING: annealing missed the enumerated optimum ({} vs {} over {} classes)\n",
                    sig6(self.objective),
                    sig6(ex.objective),
                    ex.classes
                ));
            }
        }
        out
    }

    /// Per-block replication table.
    pub fn to_csv(&self) -> String {
        let t = self.priors.t;
        let mut out = String::from("block,notation");
        for h in 1..=t {
            out.push_str(&format!(",r_{h}"));
        }
        out.push('\n');
        for (i, counts) in self.best.block_counts.iter().enumerate() {
            out.push_str(&format!("{},{}", i + 1, self.best.block_notation[i]));
            for &c in counts {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
pub struct BlockDetail {
    pub block: usize,
    pub ell: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct EvaluateReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(flatten)]
    pub priors: PriorsReport,
    pub id: String,
    pub feasible: bool,
    /// Absent when the design is infeasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub information: Vec<Vec<f64>>,
    pub design: DesignReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<BlockDetail>>,
}

pub fn matrix_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    m.rows()
}

impl EvaluateReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "evaluate: design {} under the {} criterion\n",
            self.id, self.priors.criterion
        ));
        match self.objective {
            Some(v) => out.push_str(&format!("objective = {}\n", sig6(v))),
            None => out.push_str("objective = infeasible (information matrix is singular)\n"),
        }
        out.push_str("design (blocks):\n");
        for (row, notation) in self.design.alloc.iter().zip(&self.design.block_notation) {
            out.push_str(&format!("  {row:?}   {notation}\n"));
        }
        out.push_str("marginal information matrix:\n");
        for row in &self.information {
            let cells: Vec<String> = row.iter().map(|v| format!("{:>12}", sig6(*v))).collect();
            out.push_str(&format!("  [{}]\n", cells.join(" ")));
        }
        if let Some(blocks) = &self.blocks {
            for detail in blocks {
                out.push_str(&format!(
                    "block {} ell = {:?}\n",
                    detail.block,
                    detail.ell.iter().map(|v| sig6(*v)).collect::<Vec<_>>()
                ));
                out.push_str(&format!("block {} omega:\n", detail.block));
                for row in &detail.omega {
                    let cells: Vec<String> =
                        row.iter().map(|v| format!("{:>12}", sig6(*v))).collect();
                    out.push_str(&format!("  [{}]\n", cells.join(" ")));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let objective = self.objective.map_or("inf".into(), sig6);
        format!(
            "id,feasible,objective\n{},{},{}\n",
            self.id, self.feasible, objective
        )
    }
}

#[derive(Serialize)]
pub struct CompareRow {
    pub id: String,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Best objective in the list divided by this row's objective.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_efficiency: Option<f64>,
    /// This row's objective divided by the worst feasible objective.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eff_vs_worst: Option<f64>,
}

#[derive(Serialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(flatten)]
    pub priors: PriorsReport,
    pub best_id: String,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    /// Fixed column order: id, objective, rel_efficiency, eff_vs_worst.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,objective,rel_efficiency,eff_vs_worst\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.id,
                row.objective.map_or("inf".into(), sig6),
                row.rel_efficiency.map_or(String::new(), sig6),
                row.eff_vs_worst.map_or(String::new(), sig6),
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "compare: {} designs under the {} criterion (best: {})\n",
            self.rows.len(),
            self.priors.criterion,
            self.best_id
        );
        out.push_str(&format!(
            "{:<10} {:>14} {:>16} {:>14}\n",
            "id", "objective", "rel_efficiency", "eff_vs_worst"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>14} {:>16} {:>14}\n",
                row.id,
                row.objective.map_or("inf".into(), sig6),
                row.rel_efficiency.map_or("-".into(), sig6),
                row.eff_vs_worst.map_or("-".into(), sig6),
            ));
        }
        out
    }
}
