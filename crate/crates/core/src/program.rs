//! Conic programs in standard form: optimize a linear objective over linear
//! equality rows with the variable vector partitioned into cone blocks.
//! Inequalities are modeled by slack variables at build time.
//!
//! # Interchange format
//!
//! Programs serialize to a line-oriented text format for debugging against
//! external solvers. All indices are zero-based; floats print in shortest
//! round-trip form. Grammar (`<n>` counts the lines of the section body):
//!
//! ```text
//! CONICPROGRAM v1
//! sense min|max
//! vars <num-columns>
//! rows <num-rows>
//! objective <n>        then n lines: <col> <value>     (nonzeros only)
//! matrix <n>           then n lines: <row> <col> <value>
//! rhs <n>              then n lines: <row> <value>     (nonzeros only)
//! cones <n>            then n lines: ZERO|NONNEG|EXP|DUALEXP <dim>
//! END
//! ```

use crate::cones::{ConeBlock, ConeKind};
use crate::linalg::CscMatrix;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub sense: Sense,
    /// Objective coefficients c, one per column.
    pub objective: Vec<f64>,
    /// Equality constraint matrix A (rows x cols).
    pub a: CscMatrix,
    /// Right-hand side b.
    pub rhs: Vec<f64>,
    /// Cone blocks partitioning the columns of A, in column order.
    pub cones: Vec<ConeBlock>,
    /// Optional variable labels.
    pub variable_names: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("cone blocks cover {covered} columns but the program has {cols}")]
    BadPartition { covered: usize, cols: usize },
    #[error("objective has {got} entries, expected {want}")]
    BadObjective { want: usize, got: usize },
    #[error("rhs has {got} entries, expected {want}")]
    BadRhs { want: usize, got: usize },
    #[error("interchange parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.a.ncols
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let covered: usize = self.cones.iter().map(|b| b.dim).sum();
        if covered != self.a.ncols {
            return Err(ProgramError::BadPartition {
                covered,
                cols: self.a.ncols,
            });
        }
        if self.objective.len() != self.a.ncols {
            return Err(ProgramError::BadObjective {
                want: self.a.ncols,
                got: self.objective.len(),
            });
        }
        if self.rhs.len() != self.a.nrows {
            return Err(ProgramError::BadRhs {
                want: self.a.nrows,
                got: self.rhs.len(),
            });
        }
        Ok(())
    }

    /// Column ranges of each cone block, in order.
    pub fn block_ranges(&self) -> Vec<(ConeBlock, std::ops::Range<usize>)> {
        let mut out = Vec::with_capacity(self.cones.len());
        let mut start = 0;
        for &b in &self.cones {
            out.push((b, start..start + b.dim));
            start += b.dim;
        }
        out
    }

    /// True iff `x` lies within `tol` of the cone product.
    pub fn in_cone(&self, x: &[f64], tol: f64) -> bool {
        self.block_ranges()
            .iter()
            .all(|(b, r)| b.contains(&x[r.clone()], tol).unwrap_or(false))
    }

    /// Serialize to the plain-text interchange format (grammar in the module
    /// docs).
    pub fn to_interchange(&self) -> String {
        let mut s = String::new();
        s.push_str("CONICPROGRAM v1\n");
        s.push_str(match self.sense {
            Sense::Minimize => "sense min\n",
            Sense::Maximize => "sense max\n",
        });
        s.push_str(&format!("vars {}\n", self.num_vars()));
        s.push_str(&format!("rows {}\n", self.num_rows()));
        let obj_nz: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        s.push_str(&format!("objective {}\n", obj_nz.len()));
        for (j, v) in obj_nz {
            s.push_str(&format!("{} {:?}\n", j, v));
        }
        let trips = self.a.triplets();
        s.push_str(&format!("matrix {}\n", trips.len()));
        for (i, j, v) in trips {
            s.push_str(&format!("{} {} {:?}\n", i, j, v));
        }
        let rhs_nz: Vec<(usize, f64)> = self
            .rhs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        s.push_str(&format!("rhs {}\n", rhs_nz.len()));
        for (i, v) in rhs_nz {
            s.push_str(&format!("{} {:?}\n", i, v));
        }
        s.push_str(&format!("cones {}\n", self.cones.len()));
        for b in &self.cones {
            let kind = match b.kind {
                ConeKind::Zero => "ZERO",
                ConeKind::Nonneg => "NONNEG",
                ConeKind::Exp => "EXP",
                ConeKind::DualExp => "DUALEXP",
            };
            s.push_str(&format!("{} {}\n", kind, b.dim));
        }
        s.push_str("END\n");
        s
    }

    /// Parse the interchange format written by [`ConicProgram::to_interchange`].
    pub fn from_interchange(text: &str) -> Result<Self, ProgramError> {
        let mut lines = text.lines().enumerate();
        let mut next = |want: &str| -> Result<(usize, String), ProgramError> {
            lines
                .next()
                .map(|(n, l)| (n + 1, l.trim().to_string()))
                .ok_or_else(|| ProgramError::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {want}"),
                })
        };
        let err = |line: usize, msg: String| ProgramError::Parse { line, msg };

        let (ln, header) = next("header")?;
        if header != "CONICPROGRAM v1" {
            return Err(err(ln, format!("bad header {header:?}")));
        }
        let (ln, sense_line) = next("sense")?;
        let sense = match sense_line.as_str() {
            "sense min" => Sense::Minimize,
            "sense max" => Sense::Maximize,
            other => return Err(err(ln, format!("bad sense line {other:?}"))),
        };
        let parse_count = |ln: usize, line: &str, key: &str| -> Result<usize, ProgramError> {
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| err(ln, format!("expected `{key} <n>`, got {line:?}")))?;
            rest.trim()
                .parse::<usize>()
                .map_err(|e| err(ln, format!("bad count: {e}")))
        };
        let (ln, l) = next("vars")?;
        let nvars = parse_count(ln, &l, "vars")?;
        let (ln, l) = next("rows")?;
        let nrows = parse_count(ln, &l, "rows")?;

        let (ln, l) = next("objective")?;
        let n_obj = parse_count(ln, &l, "objective")?;
        let mut objective = vec![0.0; nvars];
        for _ in 0..n_obj {
            let (ln, l) = next("objective entry")?;
            let mut it = l.split_whitespace();
            let j: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad objective index".into()))?;
            let v: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad objective value".into()))?;
            if j >= nvars {
                return Err(err(ln, format!("objective index {j} out of range")));
            }
            objective[j] = v;
        }

        let (ln, l) = next("matrix")?;
        let nnz = parse_count(ln, &l, "matrix")?;
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (ln, l) = next("matrix entry")?;
            let mut it = l.split_whitespace();
            let i: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad row index".into()))?;
            let j: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad col index".into()))?;
            let v: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad value".into()))?;
            if i >= nrows || j >= nvars {
                return Err(err(ln, format!("entry ({i},{j}) out of range")));
            }
            entries.push((i, j, v));
        }

        let (ln, l) = next("rhs")?;
        let n_rhs = parse_count(ln, &l, "rhs")?;
        let mut rhs = vec![0.0; nrows];
        for _ in 0..n_rhs {
            let (ln, l) = next("rhs entry")?;
            let mut it = l.split_whitespace();
            let i: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad rhs index".into()))?;
            let v: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad rhs value".into()))?;
            if i >= nrows {
                return Err(err(ln, format!("rhs index {i} out of range")));
            }
            rhs[i] = v;
        }

        let (ln, l) = next("cones")?;
        let n_blocks = parse_count(ln, &l, "cones")?;
        let mut cones = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let (ln, l) = next("cone block")?;
            let mut it = l.split_whitespace();
            let kind = match it.next() {
                Some("ZERO") => ConeKind::Zero,
                Some("NONNEG") => ConeKind::Nonneg,
                Some("EXP") => ConeKind::Exp,
                Some("DUALEXP") => ConeKind::DualExp,
                other => return Err(err(ln, format!("bad cone kind {other:?}"))),
            };
            let dim: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, "bad cone dimension".into()))?;
            cones.push(ConeBlock::new(kind, dim).map_err(|e| err(ln, e.to_string()))?);
        }
        let (ln, l) = next("END")?;
        if l != "END" {
            return Err(err(ln, format!("expected END, got {l:?}")));
        }

        let prog = ConicProgram {
            sense,
            objective,
            a: CscMatrix::from_triplets(nrows, nvars, &entries),
            rhs,
            cones,
            variable_names: None,
        };
        prog.validate().map_err(|e| ProgramError::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(prog)
    }
}

/// Incremental builder. Columns are allocated block by block; inequality rows
/// allocate their slack column at the point of creation.
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    sense: Sense,
    cones: Vec<ConeBlock>,
    ncols: usize,
    objective: Vec<f64>,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    names: Vec<Option<String>>,
}

impl ProgramBuilder {
    pub fn new(sense: Sense) -> Self {
        ProgramBuilder {
            sense,
            cones: Vec::new(),
            ncols: 0,
            objective: Vec::new(),
            entries: Vec::new(),
            rhs: Vec::new(),
            names: Vec::new(),
        }
    }

    /// Allocate a cone block; returns the index of its first column.
    pub fn add_block(&mut self, block: ConeBlock) -> usize {
        let start = self.ncols;
        self.ncols += block.dim;
        self.objective.resize(self.ncols, 0.0);
        self.names.resize(self.ncols, None);
        self.cones.push(block);
        start
    }

    /// Allocate a single variable of the given kind (a dim-1 block).
    pub fn add_var(&mut self, kind: ConeKind) -> usize {
        debug_assert!(matches!(kind, ConeKind::Zero | ConeKind::Nonneg));
        self.add_block(ConeBlock { kind, dim: 1 })
    }

    pub fn set_objective(&mut self, col: usize, value: f64) {
        self.objective[col] = value;
    }

    pub fn set_name(&mut self, col: usize, name: impl Into<String>) {
        self.names[col] = Some(name.into());
    }

    pub fn num_cols(&self) -> usize {
        self.ncols
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Add `sum coeffs = rhs`; returns the row index.
    pub fn add_eq_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.rhs.len();
        for &(j, v) in coeffs {
            debug_assert!(j < self.ncols);
            self.entries.push((row, j, v));
        }
        self.rhs.push(rhs);
        row
    }

    /// Add `sum coeffs <= rhs` via a nonnegative slack; returns (row, slack col).
    pub fn add_le_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> (usize, usize) {
        let slack = self.add_var(ConeKind::Nonneg);
        let row = self.rhs.len();
        for &(j, v) in coeffs {
            self.entries.push((row, j, v));
        }
        self.entries.push((row, slack, 1.0));
        self.rhs.push(rhs);
        (row, slack)
    }

    /// Add `sum coeffs >= rhs` via a nonnegative surplus; returns (row, slack col).
    pub fn add_ge_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> (usize, usize) {
        let slack = self.add_var(ConeKind::Nonneg);
        let row = self.rhs.len();
        for &(j, v) in coeffs {
            self.entries.push((row, j, v));
        }
        self.entries.push((row, slack, -1.0));
        self.rhs.push(rhs);
        (row, slack)
    }

    pub fn build(self) -> ConicProgram {
        let nrows = self.rhs.len();
        let names = if self.names.iter().any(|n| n.is_some()) {
            Some(
                self.names
                    .into_iter()
                    .enumerate()
                    .map(|(j, n)| n.unwrap_or_else(|| format!("x{j}")))
                    .collect(),
            )
        } else {
            None
        };
        let prog = ConicProgram {
            sense: self.sense,
            objective: self.objective,
            a: CscMatrix::from_triplets(nrows, self.ncols, &self.entries),
            rhs: self.rhs,
            cones: self.cones,
            variable_names: names,
        };
        debug_assert!(prog.validate().is_ok());
        prog
    }
}
