//! Time-dependent solvers on a star network.
//!
//! Every edge is the interval `[0, b_i]` with the node at `x = 0`. The kinetic
//! model is the discrete velocity BGK equation
//! `f_t + xi f_x = -(f - M(f)) / eps` with velocities `xi_k` taken from the
//! Gauss rule (`sqrt(2) v_k` for Hermite). Each `f_k` stores the mass carried
//! by velocity `xi_k`, so `rho = sum f_k` and `q = sum xi_k f_k`.
//!
//! The macroscopic model is the wave equation `rho_t + q_x = 0`,
//! `q_t + a^2 rho_x = 0` coupled at the node through `rho + delta q`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coupling::MacroCoupling;
use crate::layer::{compute_delta, EdgeCount, LayerOperator};
use crate::numerics::solve_dense;
use crate::orthopoly::{gauss_rule, Family};
use crate::{Error, Result};

const BETA_TOL: f64 = 1e-12;

/// Geometry, model and initial data of a star network run.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub family: Family,
    pub n_edges: usize,
    pub edge_lengths: Vec<f64>,
    /// Relaxation time; `f64::INFINITY` disables relaxation.
    pub epsilon: f64,
    /// Half the number of discrete velocities.
    pub n_half: usize,
    pub dx: f64,
    pub final_time: f64,
    pub cfl: f64,
    /// `beta[(i, j)]`: share of edge `j`'s outgoing mass entering edge `i`.
    pub beta: DMatrix<f64>,
    /// Initial equilibrium `(rho, q)` per edge.
    pub initial: Vec<(f64, f64)>,
    /// Far-field equilibrium `(rho, q)` prescribed at the outer end of every edge.
    pub outer: Vec<(f64, f64)>,
}

impl NetworkConfig {
    /// Star with `beta_ij = 1 / (n - 1)`, `beta_ii = 0` and the default grid
    /// (`b = 0.5`, `dx = 1e-3`, `t = 0.1`, `cfl = 0.9`); outer data equal the initial data.
    pub fn symmetric(family: Family, n_half: usize, epsilon: f64, initial: Vec<(f64, f64)>) -> Self {
        let n = initial.len();
        Self {
            family,
            n_edges: n,
            edge_lengths: vec![0.5; n],
            epsilon,
            n_half,
            dx: 1e-3,
            final_time: 0.1,
            cfl: 0.9,
            beta: symmetric_beta(n),
            outer: initial.clone(),
            initial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_edges;
        if n < 2 {
            return Err(Error::InvalidInput(format!("a star needs at least 2 edges, got {n}")));
        }
        if self.n_half < 1 {
            return Err(Error::InvalidInput("need at least one velocity pair".into()));
        }
        for (name, len) in [("edge_lengths", self.edge_lengths.len()), ("initial", self.initial.len()), ("outer", self.outer.len())] {
            if len != n {
                return Err(Error::InvalidInput(format!("{name} has {len} entries for {n} edges")));
            }
        }
        if self.beta.shape() != (n, n) {
            return Err(Error::InvalidInput(format!("beta must be {n}x{n}, got {:?}", self.beta.shape())));
        }
        if self.beta.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidInput("beta entries must be finite and non-negative".into()));
        }
        for j in 0..n {
            let s: f64 = self.beta.column(j).sum();
            if (s - 1.0).abs() > BETA_TOL {
                return Err(Error::InvalidInput(format!("beta column {j} sums to {s}, expected 1")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        for (name, v) in [("dx", self.dx), ("final_time", self.final_time)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cfl > 0.0) {
            return Err(Error::InvalidInput(format!("cfl must be positive, got {}", self.cfl)));
        }
        if self.cfl > 1.0 {
            return Err(Error::Cfl { dt: self.cfl * self.dx, limit: self.dx });
        }
        for b in &self.edge_lengths {
            self.cells_for(*b)?;
        }
        if self.initial.iter().chain(&self.outer).any(|(r, q)| !(r.is_finite() && q.is_finite())) {
            return Err(Error::InvalidInput("initial and outer data must be finite".into()));
        }
        Ok(())
    }

    fn cells_for(&self, b: f64) -> Result<usize> {
        let cells = (b / self.dx).round();
        if !(b > 0.0) || cells < 1.0 || (cells * self.dx - b).abs() > 1e-9 * b {
            return Err(Error::InvalidInput(format!("edge length {b} is not a positive multiple of dx = {}", self.dx)));
        }
        Ok(cells as usize)
    }

    pub fn cells(&self) -> Vec<usize> {
        self.edge_lengths.iter().map(|&b| self.cells_for(b).unwrap_or(0)).collect()
    }

    /// Cell centres of edge `edge`.
    pub fn cell_centres(&self, edge: usize) -> Vec<f64> {
        let cells = self.cells_for(self.edge_lengths[edge]).unwrap_or(0);
        (0..cells).map(|i| (i as f64 + 0.5) * self.dx).collect()
    }
}

/// `beta_ij = 1 / (n - 1)` off the diagonal.
pub fn symmetric_beta(n: usize) -> DMatrix<f64> {
    let off = if n > 1 { 1.0 / (n as f64 - 1.0) } else { 0.0 };
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { off })
}

/// Discrete velocities and equilibrium fractions of the kinetic model.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityModel {
    pub family: Family,
    /// Transport speeds `xi_k`, ascending and symmetric.
    pub speeds: Vec<f64>,
    /// Probability weights, `sum = 1`.
    pub fractions: Vec<f64>,
    /// `a^2 = sum fractions * xi^2`.
    pub a2: f64,
}

impl VelocityModel {
    pub fn new(family: Family, n_half: usize) -> Result<Self> {
        let rule = gauss_rule(family, 2 * n_half)?;
        let scale = match family {
            Family::Legendre => 1.0,
            Family::Hermite => std::f64::consts::SQRT_2,
        };
        let mass = family.weight_mass();
        Ok(Self {
            family,
            speeds: rule.nodes.iter().map(|v| scale * v).collect(),
            fractions: rule.weights.iter().map(|w| w / mass).collect(),
            a2: family.wave_speed().powi(2),
        })
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of `-xi_k`.
    pub fn mirror(&self, k: usize) -> usize {
        self.len() - 1 - k
    }

    pub fn moments(&self, f: &[f64]) -> (f64, f64) {
        let rho = f.iter().sum();
        let q = f.iter().zip(&self.speeds).map(|(f, xi)| f * xi).sum();
        (rho, q)
    }

    /// Discrete Maxwellian with density `rho` and flux `q`.
    pub fn maxwellian(&self, rho: f64, q: f64, out: &mut [f64]) {
        let qa = q / self.a2;
        for ((m, w), xi) in out.iter_mut().zip(&self.fractions).zip(&self.speeds) {
            *m = w * (rho + xi * qa);
        }
    }
}

/// Cell values on all edges, `f[edge][cell * 2N + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticField {
    pub velocities: VelocityModel,
    pub dx: f64,
    pub f: Vec<Vec<f64>>,
}

impl KineticField {
    /// Equilibrium field with constant `(rho, q)` per edge.
    pub fn equilibrium(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let velocities = VelocityModel::new(config.family, config.n_half)?;
        let m = velocities.len();
        let f = config
            .cells()
            .iter()
            .zip(&config.initial)
            .map(|(&cells, &(rho, q))| {
                let mut cell = vec![0.0; m];
                velocities.maxwellian(rho, q, &mut cell);
                cell.repeat(cells)
            })
            .collect();
        Ok(Self { velocities, dx: config.dx, f })
    }

    pub fn n_edges(&self) -> usize {
        self.f.len()
    }

    pub fn cells(&self, edge: usize) -> usize {
        self.f[edge].len() / self.velocities.len()
    }

    pub fn cell(&self, edge: usize, i: usize) -> &[f64] {
        let m = self.velocities.len();
        &self.f[edge][i * m..(i + 1) * m]
    }

    /// Density per cell on one edge.
    pub fn density(&self, edge: usize) -> Vec<f64> {
        self.f[edge].chunks(self.velocities.len()).map(|c| c.iter().sum()).collect()
    }

    pub fn flux(&self, edge: usize) -> Vec<f64> {
        self.f[edge].chunks(self.velocities.len()).map(|c| self.velocities.moments(c).1).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.f.iter().map(|e| e.iter().sum::<f64>()).sum::<f64>() * self.dx
    }
}

/// Values at `x = 0` on every edge: incoming velocities from the node
/// coupling, outgoing ones from the first cell.
pub fn apply_kinetic_node_coupling(field: &KineticField, beta: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let vm = &field.velocities;
    let m = vm.len();
    let n = field.n_edges();
    (0..n)
        .map(|i| {
            let mut trace = field.cell(i, 0).to_vec();
            for k in m / 2..m {
                let mirror = vm.mirror(k);
                trace[k] = (0..n).map(|j| beta[(i, j)] * field.cell(j, 0)[mirror]).sum();
            }
            trace
        })
        .collect()
}

/// `sum_k xi_k^p f_k(0)` per edge for the given node traces.
pub fn node_moment(vm: &VelocityModel, traces: &[Vec<f64>], power: i32) -> Vec<f64> {
    traces.iter().map(|t| t.iter().zip(&vm.speeds).map(|(f, xi)| xi.powi(power) * f).sum()).collect()
}

/// Stable time step for the configuration.
pub fn time_step(config: &NetworkConfig, vm: &VelocityModel) -> f64 {
    config.cfl * config.dx / vm.max_speed()
}

/// One upwind transport step followed by implicit relaxation. Returns the
/// mass that entered through the outer boundaries during the step.
pub fn kinetic_step(field: &mut KineticField, config: &NetworkConfig, dt: f64) -> Result<f64> {
    let vm = field.velocities.clone();
    let limit = config.dx / vm.max_speed();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let node = apply_kinetic_node_coupling(field, &config.beta);
    let m = vm.len();
    let lambda = dt / field.dx;
    let kappa = if config.epsilon.is_finite() { dt / config.epsilon } else { 0.0 };

    let inflow: Vec<f64> = field
        .f
        .par_iter_mut()
        .zip(node.par_iter())
        .zip(config.outer.par_iter())
        .map(|((f, trace), &(rho_out, q_out))| {
            let cells = f.len() / m;
            let mut outer = vec![0.0; m];
            vm.maxwellian(rho_out, q_out, &mut outer);
            let old = f.clone();
            let mut inflow = 0.0;
            for k in 0..m {
                let xi = vm.speeds[k];
                if xi > 0.0 {
                    let mut left = trace[k];
                    for c in 0..cells {
                        let here = old[c * m + k];
                        f[c * m + k] = here - lambda * xi * (here - left);
                        left = here;
                    }
                } else {
                    let mut right = outer[k];
                    inflow -= dt * xi * outer[k];
                    for c in (0..cells).rev() {
                        let here = old[c * m + k];
                        f[c * m + k] = here - lambda * xi * (right - here);
                        right = here;
                    }
                }
                if xi > 0.0 {
                    inflow -= dt * xi * old[(cells - 1) * m + k];
                }
            }
            if kappa > 0.0 {
                let mut eq = vec![0.0; m];
                for cell in f.chunks_mut(m) {
                    let (rho, q) = vm.moments(cell);
                    vm.maxwellian(rho, q, &mut eq);
                    for (v, e) in cell.iter_mut().zip(&eq) {
                        *v = (*v + kappa * e) / (1.0 + kappa);
                    }
                }
            }
            inflow
        })
        .collect();
    Ok(inflow.iter().sum())
}

/// Density profiles of one snapshot, one vector per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub density: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KineticRun {
    pub field: KineticField,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub dt: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Net mass entering through the outer boundaries.
    pub boundary_inflow: f64,
}

impl KineticRun {
    /// `|m(T) - m(0) - inflow| / m(0)`.
    pub fn mass_defect(&self) -> f64 {
        (self.final_mass - self.initial_mass - self.boundary_inflow).abs() / self.initial_mass.abs().max(f64::MIN_POSITIVE)
    }

    /// `|m(T) - m(0)| / m(0)`.
    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass).abs() / self.initial_mass.abs().max(f64::MIN_POSITIVE)
    }
}

fn snapshot_schedule(config: &NetworkConfig, times: &[f64]) -> Result<Vec<f64>> {
    let mut t: Vec<f64> = times.to_vec();
    if t.iter().any(|&s| !(s >= 0.0 && s <= config.final_time)) {
        return Err(Error::InvalidInput(format!("snapshot times must lie in [0, {}]", config.final_time)));
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// Step sizes that land exactly on every snapshot time and the final time.
fn step_plan(final_time: f64, dt: f64, stops: &[f64]) -> Vec<(f64, bool)> {
    let mut plan = Vec::new();
    let mut t = 0.0;
    let mut marks: Vec<f64> = stops.iter().copied().filter(|&s| s > 0.0).collect();
    marks.push(final_time);
    for mark in marks {
        let span = mark - t;
        if span <= 0.0 {
            continue;
        }
        let steps = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            plan.push((h, s + 1 == steps && stops.contains(&mark)));
        }
        t = mark;
    }
    plan
}

/// Runs the kinetic model to `config.final_time`, recording densities at `times`.
pub fn kinetic_simulate(config: &NetworkConfig, times: &[f64]) -> Result<KineticRun> {
    let mut field = KineticField::equilibrium(config)?;
    let stops = snapshot_schedule(config, times)?;
    let dt = time_step(config, &field.velocities);
    let initial_mass = field.total_mass();
    let mut snapshots = Vec::new();
    if stops.first() == Some(&0.0) {
        snapshots.push(Snapshot { time: 0.0, density: (0..field.n_edges()).map(|e| field.density(e)).collect() });
    }
    let mut inflow = 0.0;
    let mut t = 0.0;
    let plan = step_plan(config.final_time, dt, &stops);
    for &(h, record) in &plan {
        inflow += kinetic_step(&mut field, config, h)?;
        t += h;
        if record {
            let time = *stops.iter().min_by(|a, b| (*a - t).abs().total_cmp(&(*b - t).abs())).unwrap();
            snapshots.push(Snapshot { time, density: (0..field.n_edges()).map(|e| field.density(e)).collect() });
        }
    }
    let final_mass = field.total_mass();
    Ok(KineticRun { field, snapshots, steps: plan.len(), dt, initial_mass, final_mass, boundary_inflow: inflow })
}

/// `(rho, q)` per cell on all edges.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroField {
    pub dx: f64,
    pub rho: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl MacroField {
    pub fn equilibrium(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let cells = config.cells();
        Ok(Self {
            dx: config.dx,
            rho: cells.iter().zip(&config.initial).map(|(&c, &(r, _))| vec![r; c]).collect(),
            q: cells.iter().zip(&config.initial).map(|(&c, &(_, q))| vec![q; c]).collect(),
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.iter().map(|e| e.iter().sum::<f64>()).sum::<f64>() * self.dx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroRun {
    pub field: MacroField,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub delta: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub boundary_inflow: f64,
}

/// Upwind scheme for the wave equation in characteristic variables
/// `r_+ = q + a rho` (outgoing from the node) and `r_- = q - a rho`.
pub fn macro_simulate(config: &NetworkConfig, delta: f64, times: &[f64]) -> Result<MacroRun> {
    let mut field = MacroField::equilibrium(config)?;
    let n = config.n_edges;
    let a = config.family.wave_speed();
    let coupling = MacroCoupling::new(n, a, delta)?;
    // Fails early at delta = -1/a.
    coupling.solve(&vec![0.0; n])?;
    let stops = snapshot_schedule(config, times)?;
    let dt = config.cfl * config.dx / a;
    let initial_mass = field.total_mass();
    let mut snapshots = Vec::new();
    if stops.first() == Some(&0.0) {
        snapshots.push(Snapshot { time: 0.0, density: field.rho.clone() });
    }
    let plan = step_plan(config.final_time, dt, &stops);
    let mut t = 0.0;
    let mut inflow = 0.0;
    for &(h, record) in &plan {
        let r_minus: Vec<f64> = (0..n).map(|i| field.q[i][0] - a * field.rho[i][0]).collect();
        let rhs = coupling.rhs(&r_minus)?;
        let u = solve_dense(&coupling.matrix_b, &rhs)?;
        let lambda = h / config.dx;
        let steps: Vec<f64> = field
            .rho
            .par_iter_mut()
            .zip(field.q.par_iter_mut())
            .enumerate()
            .map(|(i, (rho, q))| {
                let cells = rho.len();
                let (rho_out, q_out) = config.outer[i];
                let r_out = q_out - a * rho_out;
                // Face values: node face from the coupling, then interior faces, then the outer face.
                let mut face_rho = Vec::with_capacity(cells + 1);
                let mut face_q = Vec::with_capacity(cells + 1);
                face_rho.push(u[i]);
                face_q.push(u[n + i]);
                for c in 0..cells {
                    let rp = q[c] + a * rho[c];
                    let rm = if c + 1 < cells { q[c + 1] - a * rho[c + 1] } else { r_out };
                    face_rho.push((rp - rm) / (2.0 * a));
                    face_q.push((rp + rm) / 2.0);
                }
                for c in 0..cells {
                    rho[c] -= lambda * (face_q[c + 1] - face_q[c]);
                    q[c] -= lambda * a * a * (face_rho[c + 1] - face_rho[c]);
                }
                -h * face_q[cells]
            })
            .collect();
        inflow += steps.iter().sum::<f64>();
        t += h;
        if record {
            let time = *stops.iter().min_by(|x, y| (*x - t).abs().total_cmp(&(*y - t).abs())).unwrap();
            snapshots.push(Snapshot { time, density: field.rho.clone() });
        }
    }
    let final_mass = field.total_mass();
    Ok(MacroRun {
        field,
        snapshots,
        steps: plan.len(),
        delta,
        initial_mass,
        final_mass,
        boundary_inflow: inflow,
    })
}

/// `delta` of the layer problem matching the kinetic configuration.
pub fn spectral_delta(config: &NetworkConfig) -> Result<f64> {
    let op = LayerOperator::new(config.family, config.n_half.max(2), EdgeCount::Finite(config.n_edges))?;
    Ok(compute_delta(&op)?.delta)
}

/// Density mismatch on one edge outside the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeError {
    pub edge: usize,
    pub max: f64,
    pub l1: f64,
}

/// Compares density profiles on `x > cutoff`; grids must coincide.
pub fn compare_runs(kinetic: &[Vec<f64>], macro_rho: &[Vec<f64>], dx: f64, cutoff: f64) -> Result<Vec<EdgeError>> {
    if kinetic.len() != macro_rho.len() {
        return Err(Error::GridMismatch(format!("{} kinetic edges vs {} macroscopic edges", kinetic.len(), macro_rho.len())));
    }
    kinetic
        .iter()
        .zip(macro_rho)
        .enumerate()
        .map(|(edge, (k, m))| {
            if k.len() != m.len() {
                return Err(Error::GridMismatch(format!("edge {edge}: {} vs {} cells", k.len(), m.len())));
            }
            let (mut max, mut l1) = (0.0_f64, 0.0);
            for (c, (a, b)) in k.iter().zip(m).enumerate() {
                if (c as f64 + 0.5) * dx > cutoff {
                    let d = (a - b).abs();
                    max = max.max(d);
                    l1 += d * dx;
                }
            }
            Ok(EdgeError { edge, max, l1 })
        })
        .collect()
}

/// Density at position `x` by linear interpolation between cell centres.
pub fn sample(profile: &[f64], dx: f64, x: f64) -> f64 {
    let s = (x / dx - 0.5).clamp(0.0, (profile.len() - 1) as f64);
    let i = (s.floor() as usize).min(profile.len().saturating_sub(2));
    let t = s - i as f64;
    if profile.len() == 1 {
        return profile[0];
    }
    profile[i] * (1.0 - t) + profile[i + 1] * t
}

/// Plain `(x, value)` pairs of one edge profile.
pub fn profile_points(profile: &[f64], dx: f64) -> Vec<(f64, f64)> {
    profile.iter().enumerate().map(|(c, &v)| ((c as f64 + 0.5) * dx, v)).collect()
}
