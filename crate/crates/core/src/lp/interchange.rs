//! Plain-text exchange of equality-form LPs with external solvers.
//!
//! A problem directory holds three files; all indices are zero-based and the
//! sense is always maximize, variables nonnegative:
//!
//! ```text
//! matrix.txt     first line "rows cols nnz", then nnz lines "row col coef"
//! objective.txt  cols lines, one objective coefficient each
//! rhs.txt        rows lines, one right-hand side each
//! ```
//!
//! The solver answers with `primal.txt`: `cols` numbers separated by any
//! whitespace. Numbers are written in Rust's shortest round-trip form, so a
//! write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};

use super::solver::{LpSolution, LpSolver};
use super::LpProblem;

pub const MATRIX_FILE: &str = "matrix.txt";
pub const OBJECTIVE_FILE: &str = "objective.txt";
pub const RHS_FILE: &str = "rhs.txt";
pub const PRIMAL_FILE: &str = "primal.txt";

fn write(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read(path: PathBuf) -> Result<String> {
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

fn column(values: &[f64]) -> String {
    let mut s = String::new();
    for v in values {
        let _ = writeln!(s, "{v:?}");
    }
    s
}

fn parse<T: std::str::FromStr>(token: Option<&str>, what: &str, file: &str) -> Result<T> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Solver(format!("{file}: malformed {what}")))
}

fn numbers(text: &str, file: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| parse(Some(t), "number", file))
        .collect()
}

pub fn write_problem(lp: &LpProblem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut matrix = format!("{} {} {}\n", lp.num_rows, lp.num_vars, lp.triplets.len());
    for &(i, j, a) in &lp.triplets {
        let _ = writeln!(matrix, "{i} {j} {a:?}");
    }
    write(dir.join(MATRIX_FILE), matrix)?;
    write(dir.join(OBJECTIVE_FILE), column(&lp.objective))?;
    write(dir.join(RHS_FILE), column(&lp.rhs))
}

pub fn read_problem(dir: &Path) -> Result<LpProblem> {
    let matrix = read(dir.join(MATRIX_FILE))?;
    let mut lines = matrix.lines();
    let mut header = lines.next().unwrap_or("").split_whitespace();
    let rows: usize = parse(header.next(), "row count", MATRIX_FILE)?;
    let cols: usize = parse(header.next(), "column count", MATRIX_FILE)?;
    let nnz: usize = parse(header.next(), "entry count", MATRIX_FILE)?;
    let mut triplets = Vec::with_capacity(nnz);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let i: usize = parse(it.next(), "row index", MATRIX_FILE)?;
        let j: usize = parse(it.next(), "column index", MATRIX_FILE)?;
        let a: f64 = parse(it.next(), "coefficient", MATRIX_FILE)?;
        if i >= rows || j >= cols {
            return Err(Error::Solver(format!(
                "{MATRIX_FILE}: entry ({i}, {j}) out of range"
            )));
        }
        triplets.push((i, j, a));
    }
    if triplets.len() != nnz {
        return Err(Error::Solver(format!(
            "{MATRIX_FILE}: header announces {nnz} entries, found {}",
            triplets.len()
        )));
    }
    let objective = numbers(&read(dir.join(OBJECTIVE_FILE))?, OBJECTIVE_FILE)?;
    let rhs = numbers(&read(dir.join(RHS_FILE))?, RHS_FILE)?;
    if objective.len() != cols || rhs.len() != rows {
        return Err(Error::Dimension(format!(
            "expected {cols} objective and {rows} rhs values, found {} and {}",
            objective.len(),
            rhs.len()
        )));
    }
    Ok(LpProblem::from_parts(rows, cols, triplets, rhs, objective))
}

pub fn write_primal(x: &[f64], dir: &Path) -> Result<()> {
    write(dir.join(PRIMAL_FILE), column(x))
}

pub fn read_primal(dir: &Path, cols: usize) -> Result<Vec<f64>> {
    let x = numbers(&read(dir.join(PRIMAL_FILE))?, PRIMAL_FILE)?;
    if x.len() != cols {
        return Err(Error::Dimension(format!(
            "{PRIMAL_FILE}: expected {cols} values, found {}",
            x.len()
        )));
    }
    Ok(x)
}

/// Runs `program args... DIR` after writing the problem into `DIR` and reads
/// the primal vector back.
#[derive(Clone, Debug)]
pub struct ExternalLpSolver {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub workdir: PathBuf,
}

impl LpSolver for ExternalLpSolver {
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution> {
        write_problem(lp, &self.workdir)?;
        let _ = fs::remove_file(self.workdir.join(PRIMAL_FILE));
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&self.workdir)
            .status()
            .map_err(|e| Error::io(&self.program, e))?;
        if !status.success() {
            return Err(Error::Solver(format!(
                "{} exited with {status}",
                self.program.display()
            )));
        }
        let x = read_primal(&self.workdir, lp.num_vars)?;
        let objective = lp.objective_value(&x);
        Ok(LpSolution { x, objective })
    }

    fn name(&self) -> &'static str {
        "external"
    }
}
