//! Primal-dual interior-point method for continuous conic programs over
//! Zero/Nonneg/Exp/DualExp blocks, on the homogeneous self-dual embedding.
//!
//! The algorithm is the predictor-corrector scheme for nonsymmetric cones
//! that needs only the primal barrier: an affine (predictor) step is followed
//! by pure centering steps until the iterate returns to a narrow neighborhood
//! of the central path, measured by the proximity
//! ||s + mu grad F(x)||_{H(x)^{-1}} / mu. Dual directions are recovered from
//! the primal barrier Hessian. The Newton KKT system is quasidefinite after
//! static regularization and is factored by sparse LDL^T under a
//! minimum-degree ordering; iterative refinement removes the perturbation the
//! regularization introduces.
//!
//! Presolve: DualExp blocks are rewritten onto Exp blocks through the linear
//! map in [`crate::cones::dual_to_primal_map`], adjacent Zero/Nonneg blocks
//! are merged, zero and duplicate rows are dropped, and rows/columns are
//! equilibrated by geometric means with one uniform scale per cone block
//! (the exponential cone only tolerates uniform scaling). Rank deficiency
//! beyond duplicate rows is not detected; the dual regularization keeps the
//! KKT solvable regardless.

use crate::cones::{self, ConeBlock, ConeKind};
use crate::linalg::{dot, ldl_symbolic, min_degree_order, norm2, CscMatrix, LdlFactor};
use crate::program::{ConicProgram, Sense};

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Relative tolerance on primal/dual feasibility and duality gap.
    pub tol: f64,
    pub max_iter: usize,
    pub frac_to_boundary: f64,
    /// Static regularization added to the Newton KKT system.
    pub static_reg: f64,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            max_iter: 200,
            frac_to_boundary: 0.98,
            static_reg: 1e-9,
            verbose: false,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        SolverSettings {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IterTrace {
    pub iteration: usize,
    pub mu: f64,
    pub gap: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Dual multipliers of the equality rows (minimization convention; for a
    /// Maximize program the pair (y, s) certifies the minimized negation).
    pub y: Vec<f64>,
    /// Dual slack, blockwise in the dual cone of each primal block.
    pub s: Vec<f64>,
    /// Objective in the program's own sense.
    pub objective_value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub trace: Vec<IterTrace>,
}

#[derive(Debug, Clone)]
pub struct DualPairCheck {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_status: SolveStatus,
    pub dual_status: SolveStatus,
}

// ---------------------------------------------------------------------------
// presolve
// ---------------------------------------------------------------------------

struct Presolved {
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    blocks: Vec<ConeBlock>,
    /// original row index -> presolved row (None = dropped)
    row_map: Vec<Option<usize>>,
    /// column starts of original DualExp blocks (rewritten onto Exp)
    dual_exp_starts: Vec<usize>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    /// set when a zero/duplicate row proves infeasibility outright
    trivially_infeasible: Option<Vec<f64>>,
    negated: bool,
}

fn presolve(prog: &ConicProgram) -> Presolved {
    let n = prog.num_vars();
    let m = prog.num_rows();
    let negated = prog.sense == Sense::Maximize;
    let mut c: Vec<f64> = if negated {
        prog.objective.iter().map(|v| -v).collect()
    } else {
        prog.objective.clone()
    };

    // Rewrite DualExp blocks onto Exp through the inverse map: the variable
    // triple becomes s = (x1, -x2-x3, -x2) with x in K_exp, so the block's
    // columns transform as (col1, -col2-col3, -col2), and c likewise.
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in prog.a.triplets() {
        col_entries[j].push((i, v));
    }
    let mut dual_exp_starts = Vec::new();
    let mut blocks = Vec::with_capacity(prog.cones.len());
    let mut start = 0;
    for &blk in &prog.cones {
        if blk.kind == ConeKind::DualExp {
            dual_exp_starts.push(start);
            blocks.push(ConeBlock::exp());
        } else {
            blocks.push(blk);
        }
        start += blk.dim;
    }
    for &s0 in &dual_exp_starts {
        let old2 = std::mem::take(&mut col_entries[s0 + 1]);
        let old3 = std::mem::take(&mut col_entries[s0 + 2]);
        let mut new2: Vec<(usize, f64)> = Vec::with_capacity(old2.len() + old3.len());
        new2.extend(old2.iter().map(|&(i, v)| (i, -v)));
        new2.extend(old3.iter().map(|&(i, v)| (i, -v)));
        col_entries[s0 + 1] = new2;
        col_entries[s0 + 2] = old2.iter().map(|&(i, v)| (i, -v)).collect();
        let (c2, c3) = (c[s0 + 1], c[s0 + 2]);
        c[s0 + 1] = -c2 - c3;
        c[s0 + 2] = -c2;
    }
    let entries: Vec<(usize, usize, f64)> = col_entries
        .into_iter()
        .enumerate()
        .flat_map(|(j, col)| col.into_iter().map(move |(i, v)| (i, j, v)))
        .collect();

    // merge adjacent Zero/Nonneg blocks
    let mut merged: Vec<ConeBlock> = Vec::with_capacity(blocks.len());
    for blk in blocks {
        match merged.last_mut() {
            Some(last)
                if last.kind == blk.kind
                    && matches!(blk.kind, ConeKind::Zero | ConeKind::Nonneg) =>
            {
                last.dim += blk.dim;
            }
            _ => merged.push(blk),
        }
    }

    // drop zero rows and duplicate rows
    let a0 = CscMatrix::from_triplets(m, n, &entries);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for j in 0..n {
        for (i, v) in a0.col_iter(j) {
            if v != 0.0 {
                rows[i].push((j, v));
            }
        }
    }
    let mut row_map: Vec<Option<usize>> = vec![None; m];
    let mut kept_rows: Vec<usize> = Vec::new();
    let mut seen: std::collections::BTreeMap<Vec<(usize, u64)>, usize> =
        std::collections::BTreeMap::new();
    let mut trivially_infeasible = None;
    for i in 0..m {
        if rows[i].is_empty() {
            if prog.rhs[i].abs() > 1e-12 && trivially_infeasible.is_none() {
                let mut y = vec![0.0; m];
                y[i] = prog.rhs[i].signum();
                trivially_infeasible = Some(y);
            }
            continue;
        }
        let key: Vec<(usize, u64)> = rows[i].iter().map(|&(j, v)| (j, v.to_bits())).collect();
        match seen.get(&key) {
            Some(&first) => {
                if (prog.rhs[i] - prog.rhs[first]).abs() > 1e-12 && trivially_infeasible.is_none() {
                    let sgn = (prog.rhs[i] - prog.rhs[first]).signum();
                    let mut y = vec![0.0; m];
                    y[i] = sgn;
                    y[first] = -sgn;
                    trivially_infeasible = Some(y);
                }
            }
            None => {
                seen.insert(key, i);
                row_map[i] = Some(kept_rows.len());
                kept_rows.push(i);
            }
        }
    }
    let m2 = kept_rows.len();
    let mut b: Vec<f64> = kept_rows.iter().map(|&i| prog.rhs[i]).collect();
    let kept_entries: Vec<(usize, usize, f64)> = entries
        .iter()
        .filter_map(|&(i, j, v)| row_map[i].map(|i2| (i2, j, v)))
        .collect();
    let mut a = CscMatrix::from_triplets(m2, n, &kept_entries);

    // geometric-mean equilibration, uniform scale per cone block
    let mut row_scale = vec![1.0f64; m2];
    let mut col_scale = vec![1.0f64; n];
    let block_of_col = {
        let mut map = vec![0usize; n];
        let mut start = 0;
        for (bi, blk) in merged.iter().enumerate() {
            for j in start..start + blk.dim {
                map[j] = bi;
            }
            start += blk.dim;
        }
        map
    };
    for _pass in 0..3 {
        let mut row_min = vec![f64::INFINITY; m2];
        let mut row_max = vec![0.0f64; m2];
        for j in 0..n {
            for (i, v) in a.col_iter(j) {
                let av = v.abs();
                if av > 0.0 {
                    row_min[i] = row_min[i].min(av);
                    row_max[i] = row_max[i].max(av);
                }
            }
        }
        let mut r = vec![1.0f64; m2];
        for i in 0..m2 {
            if row_max[i] > 0.0 {
                r[i] = (1.0 / (row_min[i] * row_max[i]).sqrt()).clamp(1e-4, 1e4);
            }
        }
        for j in 0..n {
            for p in a.colptr[j]..a.colptr[j + 1] {
                a.values[p] *= r[a.rowind[p]];
            }
        }
        for i in 0..m2 {
            row_scale[i] *= r[i];
        }
        let mut col_min = vec![f64::INFINITY; n];
        let mut col_max = vec![0.0f64; n];
        for j in 0..n {
            for (_, v) in a.col_iter(j) {
                let av = v.abs();
                if av > 0.0 {
                    col_min[j] = col_min[j].min(av);
                    col_max[j] = col_max[j].max(av);
                }
            }
        }
        let mut blk_scale = vec![1.0f64; merged.len()];
        let mut start = 0;
        for (bi, blk) in merged.iter().enumerate() {
            let mut log_sum = 0.0;
            let mut cnt = 0usize;
            for j in start..start + blk.dim {
                if col_max[j] > 0.0 {
                    log_sum += (1.0 / (col_min[j] * col_max[j]).sqrt())
                        .clamp(1e-4, 1e4)
                        .ln();
                    cnt += 1;
                }
            }
            if cnt > 0 {
                blk_scale[bi] = (log_sum / cnt as f64).exp().clamp(1e-4, 1e4);
            }
            start += blk.dim;
        }
        for j in 0..n {
            let sc = blk_scale[block_of_col[j]];
            for p in a.colptr[j]..a.colptr[j + 1] {
                a.values[p] *= sc;
            }
            col_scale[j] *= sc;
        }
    }
    for i in 0..m2 {
        b[i] *= row_scale[i];
    }
    for j in 0..n {
        c[j] *= col_scale[j];
    }

    Presolved {
        a,
        b,
        c,
        blocks: merged,
        row_map,
        dual_exp_starts,
        row_scale,
        col_scale,
        trivially_infeasible,
        negated,
    }
}

// ---------------------------------------------------------------------------
// barrier state over the presolved block structure
// ---------------------------------------------------------------------------

struct BlockLayout {
    blocks: Vec<(ConeBlock, usize)>, // (block, start column)
    nu_bar: f64,
}

impl BlockLayout {
    fn new(blocks: &[ConeBlock]) -> Self {
        let mut list = Vec::with_capacity(blocks.len());
        let mut start = 0;
        let mut nu = 0.0;
        for &b in blocks {
            list.push((b, start));
            start += b.dim;
            nu += b.complexity();
        }
        BlockLayout {
            blocks: list,
            nu_bar: nu + 1.0,
        }
    }
}

struct BarrierState {
    grad: Vec<f64>,
    /// 1/x_j^2 on Nonneg columns, 0 elsewhere
    hdiag: Vec<f64>,
    /// Hessians of the Exp blocks, in layout order
    exp_h: Vec<[[f64; 3]; 3]>,
}

fn eval_barrier_state(layout: &BlockLayout, x: &[f64]) -> Option<BarrierState> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut hdiag = vec![0.0; n];
    let mut exp_h = Vec::new();
    for &(blk, start) in &layout.blocks {
        match blk.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                for j in start..start + blk.dim {
                    if x[j] <= 0.0 {
                        return None;
                    }
                    grad[j] = -1.0 / x[j];
                    hdiag[j] = 1.0 / (x[j] * x[j]);
                }
            }
            ConeKind::Exp => {
                let (_, g, h) = cones::exp_barrier([x[start], x[start + 1], x[start + 2]])?;
                grad[start] = g[0];
                grad[start + 1] = g[1];
                grad[start + 2] = g[2];
                exp_h.push(h);
            }
            ConeKind::DualExp => unreachable!("rewritten in presolve"),
        }
    }
    Some(BarrierState { grad, hdiag, exp_h })
}

/// out = H v (barrier Hessian, unit mu)
fn apply_h(layout: &BlockLayout, bs: &BarrierState, v: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = bs.hdiag[j] * v[j];
    }
    let mut e = 0;
    for &(blk, start) in &layout.blocks {
        if blk.kind == ConeKind::Exp {
            let h = &bs.exp_h[e];
            e += 1;
            for i in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += h[i][k] * v[start + k];
                }
                out[start + i] = acc;
            }
        }
    }
}

fn solve3(h: &[[f64; 3]; 3], r: [f64; 3]) -> [f64; 3] {
    // Gaussian elimination with partial pivoting on a copy.
    let mut a = [
        [h[0][0], h[0][1], h[0][2], r[0]],
        [h[1][0], h[1][1], h[1][2], r[1]],
        [h[2][0], h[2][1], h[2][2], r[2]],
    ];
    for k in 0..3 {
        let mut p = k;
        for i in k + 1..3 {
            if a[i][k].abs() > a[p][k].abs() {
                p = i;
            }
        }
        a.swap(k, p);
        let piv = a[k][k];
        for i in k + 1..3 {
            let f = a[i][k] / piv;
            for j in k..4 {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut acc = a[k][3];
        for j in k + 1..3 {
            acc -= a[k][j] * x[j];
        }
        x[k] = acc / a[k][k];
    }
    x
}

/// sum over barrier blocks of psi^T H^{-1} psi (Zero blocks contribute 0).
fn hinv_quadform(layout: &BlockLayout, bs: &BarrierState, x: &[f64], psi: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut e = 0;
    for &(blk, start) in &layout.blocks {
        match blk.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                for j in start..start + blk.dim {
                    total += psi[j] * psi[j] * x[j] * x[j];
                }
            }
            ConeKind::Exp => {
                let h = &bs.exp_h[e];
                e += 1;
                let r = [psi[start], psi[start + 1], psi[start + 2]];
                let z = solve3(h, r);
                total += r[0] * z[0] + r[1] * z[1] + r[2] * z[2];
            }
            ConeKind::DualExp => unreachable!(),
        }
    }
    total.max(0.0)
}

fn x_interior(layout: &BlockLayout, x: &[f64]) -> bool {
    let mut ok = true;
    for &(blk, start) in &layout.blocks {
        match blk.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                if x[start..start + blk.dim].iter().any(|&v| v <= 0.0) {
                    ok = false;
                    break;
                }
            }
            ConeKind::Exp => {
                if cones::exp_barrier([x[start], x[start + 1], x[start + 2]]).is_none() {
                    ok = false;
                    break;
                }
            }
            ConeKind::DualExp => unreachable!(),
        }
    }
    ok
}

fn s_dual_interior(layout: &BlockLayout, s: &[f64]) -> bool {
    for &(blk, start) in &layout.blocks {
        match blk.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                if s[start..start + blk.dim].iter().any(|&v| v <= 0.0) {
                    return false;
                }
            }
            ConeKind::Exp => {
                let (s1, s2, s3) = (s[start], s[start + 1], s[start + 2]);
                if !(s3 < 0.0 && s1 > -s3 * ((s2 - s3) / s3).exp()) {
                    return false;
                }
            }
            ConeKind::DualExp => unreachable!(),
        }
    }
    true
}

// ---------------------------------------------------------------------------
// KKT assembly and factorization
// ---------------------------------------------------------------------------

struct KktSystem {
    n: usize,
    m: usize,
    perm: Vec<usize>,
    pattern: CscMatrix,
    /// destination value index of each slot, in slot order: n diagonal slots,
    /// 3 off-diagonal slots per Exp block (layout order), A entries (CSC
    /// order), m dual-regularization slots
    slot_dest: Vec<usize>,
    n_slots: usize,
    symbolic: crate::linalg::LdlSymbolic,
    factor: LdlFactor,
    work: Vec<f64>,
}

impl KktSystem {
    fn new(a: &CscMatrix, layout: &BlockLayout) -> Self {
        let n = a.ncols;
        let m = a.nrows;
        let nn = n + m;
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for j in 0..n {
            slots.push((j, j));
        }
        for &(blk, start) in &layout.blocks {
            if blk.kind == ConeKind::Exp {
                slots.push((start, start + 1));
                slots.push((start, start + 2));
                slots.push((start + 1, start + 2));
            }
        }
        for j in 0..n {
            for (i, _) in a.col_iter(j) {
                slots.push((j, n + i));
            }
        }
        for i in 0..m {
            slots.push((n + i, n + i));
        }

        let edges: Vec<(usize, usize)> = slots.iter().copied().filter(|&(r, c)| r != c).collect();
        let perm = min_degree_order(nn, &edges);
        let mut iperm = vec![0usize; nn];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }

        // permuted upper-triangle position of every slot; sorted so the CSC
        // pattern comes out column-grouped with ascending rows
        let mut pos: Vec<(usize, usize, usize)> = slots
            .iter()
            .enumerate()
            .map(|(t, &(r, c))| {
                let (mut pr, mut pc) = (iperm[r], iperm[c]);
                if pr > pc {
                    std::mem::swap(&mut pr, &mut pc);
                }
                (pc, pr, t)
            })
            .collect();
        pos.sort_unstable();
        let mut count = vec![0usize; nn];
        let mut rowind: Vec<usize> = Vec::new();
        let mut slot_dest = vec![0usize; slots.len()];
        let mut prev: Option<(usize, usize)> = None;
        for &(pc, pr, t) in &pos {
            if prev != Some((pc, pr)) {
                rowind.push(pr);
                count[pc] += 1;
                prev = Some((pc, pr));
            }
            slot_dest[t] = rowind.len() - 1;
        }
        let mut colptr = vec![0usize; nn + 1];
        for j in 0..nn {
            colptr[j + 1] = colptr[j] + count[j];
        }
        let values = vec![0.0; rowind.len()];
        let pattern = CscMatrix {
            nrows: nn,
            ncols: nn,
            colptr,
            rowind,
            values,
        };
        let symbolic = ldl_symbolic(&pattern);
        let factor = LdlFactor::new(&symbolic);
        KktSystem {
            n,
            m,
            perm,
            pattern,
            slot_dest,
            n_slots: slots.len(),
            symbolic,
            factor,
            work: vec![0.0; nn],
        }
    }

    /// Refill values for the current barrier state and factor.
    fn refactor(
        &mut self,
        a: &CscMatrix,
        layout: &BlockLayout,
        bs: &BarrierState,
        mu: f64,
        reg: f64,
    ) -> bool {
        let n = self.n;
        self.pattern.values.iter_mut().for_each(|v| *v = 0.0);
        let mut t = 0;
        for j in 0..n {
            self.pattern.values[self.slot_dest[t]] += mu * bs.hdiag[j] + reg;
            t += 1;
        }
        let mut e = 0;
        for &(blk, start) in &layout.blocks {
            if blk.kind == ConeKind::Exp {
                let h = &bs.exp_h[e];
                e += 1;
                // slots 0..n are the diagonal slots, indexed by column
                self.pattern.values[self.slot_dest[start]] += mu * h[0][0];
                self.pattern.values[self.slot_dest[start + 1]] += mu * h[1][1];
                self.pattern.values[self.slot_dest[start + 2]] += mu * h[2][2];
                self.pattern.values[self.slot_dest[t]] += mu * h[0][1];
                self.pattern.values[self.slot_dest[t + 1]] += mu * h[0][2];
                self.pattern.values[self.slot_dest[t + 2]] += mu * h[1][2];
                t += 3;
            }
        }
        for j in 0..n {
            for (_, v) in a.col_iter(j) {
                self.pattern.values[self.slot_dest[t]] += v;
                t += 1;
            }
        }
        for _i in 0..self.m {
            self.pattern.values[self.slot_dest[t]] += -reg;
            t += 1;
        }
        debug_assert_eq!(t, self.n_slots);
        self.factor.factor(&self.pattern, &self.symbolic).is_ok()
    }

    /// Solve K z = r with the regularized factor plus iterative refinement
    /// against the unregularized operator. Layout of r and z: (dx, u) with
    /// u = -dy.
    fn solve(
        &mut self,
        a: &CscMatrix,
        layout: &BlockLayout,
        bs: &BarrierState,
        mu: f64,
        rhs: &[f64],
        z: &mut [f64],
    ) {
        let nn = self.n + self.m;
        debug_assert_eq!(rhs.len(), nn);
        for k in 0..nn {
            self.work[k] = rhs[self.perm[k]];
        }
        self.factor.solve_in_place(&mut self.work);
        for k in 0..nn {
            z[self.perm[k]] = self.work[k];
        }
        let mut resid = vec![0.0; nn];
        let mut delta = vec![0.0; nn];
        let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut last_worst = f64::INFINITY;
        for _round in 0..8 {
            self.apply_exact(a, layout, bs, mu, z, &mut resid);
            let mut worst = 0.0f64;
            for k in 0..nn {
                resid[k] = rhs[k] - resid[k];
                worst = worst.max(resid[k].abs());
            }
            if worst <= 1e-13 * scale || worst >= 0.5 * last_worst {
                break;
            }
            last_worst = worst;
            for k in 0..nn {
                self.work[k] = resid[self.perm[k]];
            }
            self.factor.solve_in_place(&mut self.work);
            for k in 0..nn {
                delta[self.perm[k]] = self.work[k];
            }
            for k in 0..nn {
                z[k] += delta[k];
            }
        }
    }

    /// out = [mu H dx + A^T u; A dx] (the exact, unregularized operator)
    fn apply_exact(
        &self,
        a: &CscMatrix,
        layout: &BlockLayout,
        bs: &BarrierState,
        mu: f64,
        z: &[f64],
        out: &mut [f64],
    ) {
        let (n, m) = (self.n, self.m);
        let (dx, u) = z.split_at(n);
        let mut hx = vec![0.0; n];
        apply_h(layout, bs, dx, &mut hx);
        for j in 0..n {
            out[j] = mu * hx[j];
        }
        a.t_mat_vec_acc(u, &mut out[..n]);
        for o in out[n..n + m].iter_mut() {
            *o = 0.0;
        }
        a.mat_vec_acc(dx, &mut out[n..]);
    }
}

// ---------------------------------------------------------------------------
// the HSDE loop
// ---------------------------------------------------------------------------

struct State {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

impl State {
    fn mu(&self, nu_bar: f64) -> f64 {
        (dot(&self.x, &self.s) + self.tau * self.kappa) / nu_bar
    }

    fn stepped(&self, d: &Direction, alpha: f64) -> State {
        State {
            x: self
                .x
                .iter()
                .zip(&d.dx)
                .map(|(v, dv)| v + alpha * dv)
                .collect(),
            y: self
                .y
                .iter()
                .zip(&d.dy)
                .map(|(v, dv)| v + alpha * dv)
                .collect(),
            s: self
                .s
                .iter()
                .zip(&d.ds)
                .map(|(v, dv)| v + alpha * dv)
                .collect(),
            tau: self.tau + alpha * d.dtau,
            kappa: self.kappa + alpha * d.dkappa,
        }
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

fn prox(layout: &BlockLayout, st: &State, mu: f64) -> f64 {
    let bs = match eval_barrier_state(layout, &st.x) {
        Some(bs) => bs,
        None => return f64::INFINITY,
    };
    let psi: Vec<f64> = st.s.iter().zip(&bs.grad).map(|(s, g)| s + mu * g).collect();
    let q = hinv_quadform(layout, &bs, &st.x, &psi);
    let psi_tau = st.kappa - mu / st.tau;
    ((q + st.tau * st.tau * psi_tau * psi_tau).max(0.0)).sqrt() / mu
}

const ETA_NARROW: f64 = 0.35;
const ETA_WIDE: f64 = 0.85;

pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Solution {
    if let Err(e) = prog.validate() {
        log::error!("invalid program: {e}");
        return failed_solution(prog, SolveStatus::NumericalFailure);
    }
    let ps = presolve(prog);
    if let Some(y_cert) = &ps.trivially_infeasible {
        let mut sol = failed_solution(prog, SolveStatus::PrimalInfeasible);
        sol.y = y_cert.clone();
        return sol;
    }
    let layout = BlockLayout::new(&ps.blocks);
    let n = ps.a.ncols;
    let m = ps.a.nrows;

    // interior starting point per block, with s = -grad F(x) (centered, mu = 1)
    let mut x = vec![0.0; n];
    let mut s = vec![0.0; n];
    for &(blk, start) in &layout.blocks {
        match blk.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                for j in start..start + blk.dim {
                    x[j] = 1.0;
                    s[j] = 1.0;
                }
            }
            ConeKind::Exp => {
                for k in 0..3 {
                    x[start + k] = cones::EXP_INTERIOR_POINT[k];
                }
            }
            ConeKind::DualExp => unreachable!(),
        }
    }
    {
        let bs = eval_barrier_state(&layout, &x).expect("start point interior");
        for &(blk, start) in &layout.blocks {
            if blk.kind == ConeKind::Exp {
                for k in 0..3 {
                    s[start + k] = -bs.grad[start + k];
                }
            }
        }
    }
    let mut st = State {
        x,
        y: vec![0.0; m],
        s,
        tau: 1.0,
        kappa: 1.0,
    };

    let mut kkt = KktSystem::new(&ps.a, &layout);
    let mut trace: Vec<IterTrace> = Vec::new();
    let mut stall_count = 0usize;

    for iter in 0..settings.max_iter {
        let mu = st.mu(layout.nu_bar);
        let (res, obj, pinf, dinf) = original_space_residuals(prog, &ps, &st);
        if settings.verbose {
            log::debug!(
                "iter {iter}: mu={mu:.3e} pres={:.3e} dres={:.3e} gap={:.3e} tau={:.3e} kappa={:.3e}",
                res.primal_feas,
                res.dual_feas,
                res.gap,
                st.tau,
                st.kappa
            );
        }
        if res.primal_feas <= settings.tol
            && res.dual_feas <= settings.tol
            && res.gap <= settings.tol
        {
            return finish(prog, &ps, &st, SolveStatus::Optimal, obj, res, iter, trace);
        }
        if let Some(rel) = pinf {
            if rel <= settings.tol {
                return finish(
                    prog,
                    &ps,
                    &st,
                    SolveStatus::PrimalInfeasible,
                    obj,
                    res,
                    iter,
                    trace,
                );
            }
        }
        if let Some(rel) = dinf {
            if rel <= settings.tol {
                return finish(
                    prog,
                    &ps,
                    &st,
                    SolveStatus::DualInfeasible,
                    obj,
                    res,
                    iter,
                    trace,
                );
            }
        }
        if mu <= 1e-14 || (st.tau <= 1e-12 && st.kappa <= 1e-12) {
            return finish(
                prog,
                &ps,
                &st,
                SolveStatus::NumericalFailure,
                obj,
                res,
                iter,
                trace,
            );
        }

        let bs = match eval_barrier_state(&layout, &st.x) {
            Some(bs) => bs,
            None => {
                return finish(
                    prog,
                    &ps,
                    &st,
                    SolveStatus::NumericalFailure,
                    obj,
                    res,
                    iter,
                    trace,
                )
            }
        };
        let mut reg = settings.static_reg;
        while !kkt.refactor(&ps.a, &layout, &bs, mu, reg) {
            reg *= 100.0;
            if reg > 1e-4 {
                return finish(
                    prog,
                    &ps,
                    &st,
                    SolveStatus::NumericalFailure,
                    obj,
                    res,
                    iter,
                    trace,
                );
            }
        }

        // predictor (affine) direction: gamma = 0, eta = 1
        let dir = match newton_direction(&ps, &layout, &mut kkt, &bs, &st, mu, 0.0, 1.0) {
            Some(d) => d,
            None => {
                return finish(
                    prog,
                    &ps,
                    &st,
                    SolveStatus::NumericalFailure,
                    obj,
                    res,
                    iter,
                    trace,
                )
            }
        };
        let alpha = predictor_line_search(&layout, &st, &dir, settings.frac_to_boundary);
        if alpha <= 1e-9 {
            stall_count += 1;
            if stall_count >= 3 {
                return finish(
                    prog,
                    &ps,
                    &st,
                    SolveStatus::NumericalFailure,
                    obj,
                    res,
                    iter,
                    trace,
                );
            }
        } else {
            stall_count = 0;
        }
        st = st.stepped(&dir, alpha);

        // centering correctors: gamma = 1, eta = 0
        for _ in 0..4 {
            let mu_c = st.mu(layout.nu_bar);
            let p = prox(&layout, &st, mu_c);
            if p <= ETA_NARROW {
                break;
            }
            let bs_c = match eval_barrier_state(&layout, &st.x) {
                Some(b) => b,
                None => break,
            };
            if !kkt.refactor(&ps.a, &layout, &bs_c, mu_c, reg) {
                break;
            }
            let cdir = match newton_direction(&ps, &layout, &mut kkt, &bs_c, &st, mu_c, 1.0, 0.0) {
                Some(d) => d,
                None => break,
            };
            let mut accepted = false;
            let mut ca = 1.0f64;
            while ca > 1e-4 {
                let cand = st.stepped(&cdir, ca);
                if cand.tau > 0.0 && cand.kappa > 0.0 && x_interior(&layout, &cand.x) {
                    let mu_new = cand.mu(layout.nu_bar);
                    let p_new = prox(&layout, &cand, mu_new);
                    if p_new < p {
                        st = cand;
                        accepted = true;
                        break;
                    }
                }
                ca *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        let mu_now = st.mu(layout.nu_bar);
        let (res_now, _, _, _) = original_space_residuals(prog, &ps, &st);
        trace.push(IterTrace {
            iteration: iter,
            mu: mu_now,
            gap: res_now.gap,
            step: alpha,
        });
    }

    let (res, obj, _, _) = original_space_residuals(prog, &ps, &st);
    finish(
        prog,
        &ps,
        &st,
        SolveStatus::IterLimit,
        obj,
        res,
        settings.max_iter,
        trace,
    )
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    ps: &Presolved,
    layout: &BlockLayout,
    kkt: &mut KktSystem,
    bs: &BarrierState,
    st: &State,
    mu: f64,
    gamma: f64,
    eta: f64,
) -> Option<Direction> {
    let n = kkt.n;
    let m = kkt.m;
    let a = &ps.a;

    let r_p: Vec<f64> = {
        let mut v = a.mat_vec(&st.x);
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= ps.b[i] * st.tau;
        }
        v
    };
    let r_d: Vec<f64> = {
        let mut v = vec![0.0; n];
        a.t_mat_vec_acc(&st.y, &mut v);
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = -*vj - st.s[j] + ps.c[j] * st.tau;
        }
        v
    };
    let r_g = dot(&ps.b, &st.y) - dot(&ps.c, &st.x) - st.kappa;

    let psi: Vec<f64> =
        st.s.iter()
            .zip(&bs.grad)
            .map(|(s, g)| s + gamma * mu * g)
            .collect();
    let psi_tau = st.kappa - gamma * mu / st.tau;

    // two KKT solves: residual RHS and the (c, b) system for the tau column.
    // Substituting ds = -psi - mu H dx into the dual row gives
    // -A^T dy + mu H dx + c dtau = -eta r_d - psi.
    let mut rhs1 = vec![0.0; n + m];
    for j in 0..n {
        rhs1[j] = -eta * r_d[j] - psi[j];
    }
    for i in 0..m {
        rhs1[n + i] = -eta * r_p[i];
    }
    let mut rhs2 = vec![0.0; n + m];
    for j in 0..n {
        rhs2[j] = -ps.c[j];
    }
    for i in 0..m {
        rhs2[n + i] = ps.b[i];
    }
    let mut z1 = vec![0.0; n + m];
    let mut z2 = vec![0.0; n + m];
    kkt.solve(a, layout, bs, mu, &rhs1, &mut z1);
    kkt.solve(a, layout, bs, mu, &rhs2, &mut z2);
    let (x1, u1) = z1.split_at(n);
    let (x2, u2) = z2.split_at(n);
    let y1: Vec<f64> = u1.iter().map(|v| -v).collect();
    let y2: Vec<f64> = u2.iter().map(|v| -v).collect();

    let den = dot(&ps.b, &y2) - dot(&ps.c, x2) + mu / (st.tau * st.tau);
    if !(den.is_finite() && den.abs() > 1e-300) {
        return None;
    }
    let num = -eta * r_g - psi_tau - dot(&ps.b, &y1) + dot(&ps.c, x1);
    let dtau = num / den;

    let dx: Vec<f64> = x1.iter().zip(x2).map(|(a1, a2)| a1 + dtau * a2).collect();
    let dy: Vec<f64> = y1.iter().zip(&y2).map(|(a1, a2)| a1 + dtau * a2).collect();
    let mut hdx = vec![0.0; n];
    apply_h(layout, bs, &dx, &mut hdx);
    let ds: Vec<f64> = (0..n).map(|j| -psi[j] - mu * hdx[j]).collect();
    let dkappa = -psi_tau - (mu / (st.tau * st.tau)) * dtau;
    if !dx.iter().all(|v| v.is_finite())
        || !dy.iter().all(|v| v.is_finite())
        || !ds.iter().all(|v| v.is_finite())
        || !dtau.is_finite()
        || !dkappa.is_finite()
    {
        return None;
    }
    Some(Direction {
        dx,
        dy,
        ds,
        dtau,
        dkappa,
    })
}

fn predictor_line_search(layout: &BlockLayout, st: &State, d: &Direction, ftb: f64) -> f64 {
    // closed-form boundary for the Nonneg components plus tau/kappa
    let mut amax = 1.0f64 / ftb;
    {
        let mut limit = |v: f64, dv: f64| {
            if dv < 0.0 {
                amax = amax.min(-v / dv);
            }
        };
        for &(blk, start) in &layout.blocks {
            if blk.kind == ConeKind::Nonneg {
                for j in start..start + blk.dim {
                    limit(st.x[j], d.dx[j]);
                    limit(st.s[j], d.ds[j]);
                }
            }
        }
        limit(st.tau, d.dtau);
        limit(st.kappa, d.dkappa);
    }
    let mut alpha = (ftb * amax).min(1.0);
    for _ in 0..60 {
        if alpha <= 1e-10 {
            return 0.0;
        }
        let cand = st.stepped(d, alpha);
        if cand.tau > 0.0
            && cand.kappa > 0.0
            && x_interior(layout, &cand.x)
            && s_dual_interior(layout, &cand.s)
        {
            let mu_new = cand.mu(layout.nu_bar);
            if mu_new > 0.0 && prox(layout, &cand, mu_new) <= ETA_WIDE {
                return alpha;
            }
        }
        alpha *= 0.8;
    }
    0.0
}

/// Residuals, objective and infeasibility measures in the original problem
/// space (before scaling, with DualExp blocks mapped back).
fn original_space_residuals(
    prog: &ConicProgram,
    ps: &Presolved,
    st: &State,
) -> (Residuals, f64, Option<f64>, Option<f64>) {
    let (x, y, s) = recover_raw(ps, st);
    let m = prog.num_rows();
    let n = prog.num_vars();
    let c_min: Vec<f64> = if ps.negated {
        prog.objective.iter().map(|v| -v).collect()
    } else {
        prog.objective.clone()
    };
    let tau = st.tau;

    let bnorm = 1.0 + norm2(&prog.rhs);
    let cnorm = 1.0 + norm2(&c_min);
    let mut pres = prog.a.mat_vec(&x);
    for i in 0..m {
        pres[i] = pres[i] / tau - prog.rhs[i];
    }
    let primal_feas = norm2(&pres) / bnorm;
    let mut dres = vec![0.0; n];
    prog.a.t_mat_vec_acc(&y, &mut dres);
    for j in 0..n {
        dres[j] = (dres[j] + s[j]) / tau - c_min[j];
    }
    let dual_feas = norm2(&dres) / cnorm;
    let pobj = dot(&c_min, &x) / tau;
    let dobj = dot(&prog.rhs, &y) / tau;
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

    // infeasibility certificates (tau-free)
    let by = dot(&prog.rhs, &y);
    let pinf = if by > 1e-12 {
        let mut v = vec![0.0; n];
        prog.a.t_mat_vec_acc(&y, &mut v);
        for j in 0..n {
            v[j] += s[j];
        }
        Some(norm2(&v) * bnorm / by)
    } else {
        None
    };
    let cx = dot(&c_min, &x);
    let dinf = if cx < -1e-12 {
        let v = prog.a.mat_vec(&x);
        Some(norm2(&v) * cnorm / (-cx))
    } else {
        None
    };

    let objective_sense = if ps.negated { -pobj } else { pobj };
    (
        Residuals {
            primal_feas,
            dual_feas,
            gap,
        },
        objective_sense,
        pinf,
        dinf,
    )
}

/// Map the internal iterate back to original coordinates (unscale, expand
/// dropped rows, undo the DualExp rewrite). No division by tau.
fn recover_raw(ps: &Presolved, st: &State) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = ps.a.ncols;
    let mut x: Vec<f64> = (0..n).map(|j| ps.col_scale[j] * st.x[j]).collect();
    let mut s: Vec<f64> = (0..n).map(|j| st.s[j] / ps.col_scale[j]).collect();
    let mut y = vec![0.0; ps.row_map.len()];
    for (orig, maybe) in ps.row_map.iter().enumerate() {
        if let Some(k) = maybe {
            y[orig] = ps.row_scale[*k] * st.y[*k];
        }
    }
    for &s0 in &ps.dual_exp_starts {
        let xb = [x[s0], x[s0 + 1], x[s0 + 2]];
        let sb = [s[s0], s[s0 + 1], s[s0 + 2]];
        let xo = cones::primal_to_dual_map(xb);
        let so = cones::dual_to_primal_map(sb);
        for k in 0..3 {
            x[s0 + k] = xo[k];
            s[s0 + k] = so[k];
        }
    }
    (x, y, s)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prog: &ConicProgram,
    ps: &Presolved,
    st: &State,
    status: SolveStatus,
    obj: f64,
    res: Residuals,
    iterations: usize,
    trace: Vec<IterTrace>,
) -> Solution {
    let (mut x, mut y, mut s) = recover_raw(ps, st);
    match status {
        SolveStatus::Optimal | SolveStatus::IterLimit | SolveStatus::NumericalFailure => {
            let tau = st.tau.max(1e-300);
            x.iter_mut().for_each(|v| *v /= tau);
            y.iter_mut().for_each(|v| *v /= tau);
            s.iter_mut().for_each(|v| *v /= tau);
        }
        SolveStatus::PrimalInfeasible => {
            // normalize the Farkas certificate so b^T y = 1
            let by = dot(&prog.rhs, &y);
            if by.abs() > 1e-300 {
                y.iter_mut().for_each(|v| *v /= by);
                s.iter_mut().for_each(|v| *v /= by);
            }
            x.iter_mut().for_each(|v| *v = 0.0);
        }
        SolveStatus::DualInfeasible => {
            let c_min: Vec<f64> = if ps.negated {
                prog.objective.iter().map(|v| -v).collect()
            } else {
                prog.objective.clone()
            };
            let cx = dot(&c_min, &x);
            if cx.abs() > 1e-300 {
                x.iter_mut().for_each(|v| *v /= -cx);
            }
            y.iter_mut().for_each(|v| *v = 0.0);
            s.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let objective_value = match status {
        SolveStatus::Optimal | SolveStatus::IterLimit | SolveStatus::NumericalFailure => obj,
        _ => f64::NAN,
    };
    Solution {
        status,
        x,
        y,
        s,
        objective_value,
        residuals: res,
        iterations,
        trace,
    }
}

fn failed_solution(prog: &ConicProgram, status: SolveStatus) -> Solution {
    Solution {
        status,
        x: vec![0.0; prog.num_vars()],
        y: vec![0.0; prog.num_rows()],
        s: vec![0.0; prog.num_vars()],
        objective_value: f64::NAN,
        residuals: Residuals {
            primal_feas: f64::INFINITY,
            dual_feas: f64::INFINITY,
            gap: f64::INFINITY,
        },
        iterations: 0,
        trace: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// explicit conic dual
// ---------------------------------------------------------------------------

/// Construct the explicit conic dual of `prog`'s minimization form:
/// max b^T y s.t. c - A^T y in K* per block, expressed again in standard
/// minimization form (free y variables plus one dual-cone slack block per
/// primal block; Zero primal blocks contribute slack-free equality rows).
pub fn explicit_dual(prog: &ConicProgram) -> ConicProgram {
    let n = prog.num_vars();
    let m = prog.num_rows();
    assert!(m > 0, "dual construction needs at least one row");
    let c_min: Vec<f64> = if prog.sense == Sense::Maximize {
        prog.objective.iter().map(|v| -v).collect()
    } else {
        prog.objective.clone()
    };
    let mut cones_out = vec![ConeBlock::zero(m)];
    let mut slack_col_of_var: Vec<Option<usize>> = vec![None; n];
    let mut next_col = m;
    for (blk, range) in prog.block_ranges() {
        if blk.kind == ConeKind::Zero {
            continue;
        }
        cones_out.push(blk.dual());
        for (offset, j) in range.enumerate() {
            slack_col_of_var[j] = Some(next_col + offset);
        }
        next_col += blk.dim;
    }
    let ncols = next_col;
    let mut objective = vec![0.0; ncols];
    for i in 0..m {
        objective[i] = -prog.rhs[i]; // min -b^T y
    }
    // rows: (A^T y)_j + z_j = c_j
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for j in 0..n {
        for (i, v) in prog.a.col_iter(j) {
            entries.push((j, i, v));
        }
        if let Some(zc) = slack_col_of_var[j] {
            entries.push((j, zc, 1.0));
        }
    }
    ConicProgram {
        sense: Sense::Minimize,
        objective,
        a: CscMatrix::from_triplets(n, ncols, &entries),
        rhs: c_min,
        cones: cones_out,
        variable_names: None,
    }
}

/// Solve `prog` and its explicitly constructed conic dual independently and
/// report both optimal values (in `prog`'s sense) and their difference.
pub fn solve_dual_pair_check(prog: &ConicProgram, settings: &SolverSettings) -> DualPairCheck {
    let primal = solve(prog, settings);
    let dual_prog = explicit_dual(prog);
    let dual = solve(&dual_prog, settings);
    // the dual program minimizes -b^T y; its optimum is -(min-form optimum)
    let d_min_form = -dual.objective_value;
    let dual_value = if prog.sense == Sense::Maximize {
        -d_min_form
    } else {
        d_min_form
    };
    DualPairCheck {
        primal_value: primal.objective_value,
        dual_value,
        gap: (primal.objective_value - dual_value).abs(),
        primal_status: primal.status,
        dual_status: dual.status,
    }
}
