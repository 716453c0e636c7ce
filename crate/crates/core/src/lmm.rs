//! Random-intercept linear mixed-effects model fit by profile maximum
//! likelihood.
//!
//! The model is `score = mu + alpha_language + beta_task + u_model + noise`
//! with one shared random intercept per model. Writing theta for the variance
//! ratio sigma2_u / sigma2_e, the marginal covariance is block diagonal with
//! blocks `sigma2_e * (I + theta * 1 1')` per model group, so for fixed theta
//! the GLS problem whitens in closed form and both beta and sigma2_e profile
//! out. What remains is a one-dimensional deviance minimized over log(theta).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::records::{RecordCollection, TaskId};

/// Smallest residual variance accepted as a genuine fit.
pub const DEGENERATE_SIGMA2: f64 = 1e-12;

/// Search interval for theta; zero is always checked separately.
const THETA_MIN: f64 = 1e-10;
const THETA_MAX: f64 = 1e6;
/// Coarse bracketing grid resolution on log(theta).
const GRID_POINTS: usize = 96;
/// Convergence tolerance on the deviance during golden-section refinement.
const DEVIANCE_TOL: f64 = 1e-10;
/// Relative column-norm threshold for declaring a design column dependent.
const RANK_TOL: f64 = 1e-8;

/// Treatment-coded design layout: reference levels, dummy columns, and the
/// per-model record index groups.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    reference_language: String,
    reference_task: TaskId,
    language_columns: Vec<String>,
    task_columns: Vec<TaskId>,
    model_groups: Vec<(String, Vec<usize>)>,
    n: usize,
}

impl DesignSpec {
    /// The reference (first in byte order) language absorbed in the intercept.
    pub fn reference_language(&self) -> &str {
        &self.reference_language
    }

    /// The reference (first in byte order) task absorbed in the intercept.
    pub fn reference_task(&self) -> &TaskId {
        &self.reference_task
    }

    /// Non-reference languages in sorted order, one dummy column each.
    pub fn language_columns(&self) -> &[String] {
        &self.language_columns
    }

    /// Non-reference tasks in sorted order, one dummy column each.
    pub fn task_columns(&self) -> &[TaskId] {
        &self.task_columns
    }

    /// Sorted model ids with the record indices belonging to each group.
    pub fn model_groups(&self) -> &[(String, Vec<usize>)] {
        &self.model_groups
    }

    pub fn n_records(&self) -> usize {
        self.n
    }

    /// Intercept plus one dummy per non-reference language and task.
    pub fn column_count(&self) -> usize {
        1 + self.language_columns.len() + self.task_columns.len()
    }

    /// Human-readable label of design column `j`, used in error reports.
    pub fn column_label(&self, j: usize) -> String {
        let nl = self.language_columns.len();
        if j == 0 {
            "intercept".to_string()
        } else if j <= nl {
            format!("language:{}", self.language_columns[j - 1])
        } else {
            format!("task:{}", self.task_columns[j - 1 - nl])
        }
    }
}

/// Builds the treatment-coded design for a collection.
///
/// The reference language and task are the byte-order-first levels; every
/// other level gets one indicator column. Fails on an empty collection.
pub fn encode_design(c: &RecordCollection) -> Result<DesignSpec> {
    if c.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let languages = c.languages();
    let tasks = c.tasks();
    let mut model_groups: Vec<(String, Vec<usize>)> =
        c.models().iter().map(|m| (m.clone(), Vec::new())).collect();
    let index_of: BTreeMap<String, usize> = model_groups
        .iter()
        .enumerate()
        .map(|(i, (m, _))| (m.clone(), i))
        .collect();
    for (i, r) in c.records().iter().enumerate() {
        model_groups[index_of[&r.model]].1.push(i);
    }
    Ok(DesignSpec {
        reference_language: languages[0].clone(),
        reference_task: tasks[0].clone(),
        language_columns: languages[1..].to_vec(),
        task_columns: tasks[1..].to_vec(),
        model_groups,
        n: c.len(),
    })
}

fn build_matrices(c: &RecordCollection, spec: &DesignSpec) -> (DMatrix<f64>, DVector<f64>) {
    let n = spec.n;
    let p = spec.column_count();
    let nl = spec.language_columns.len();
    let lang_col: BTreeMap<&str, usize> = spec
        .language_columns
        .iter()
        .enumerate()
        .map(|(j, l)| (l.as_str(), 1 + j))
        .collect();
    let task_col: BTreeMap<&str, usize> = spec
        .task_columns
        .iter()
        .enumerate()
        .map(|(j, t)| (t.canonical(), 1 + nl + j))
        .collect();
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (i, r) in c.records().iter().enumerate() {
        x[(i, 0)] = 1.0;
        if let Some(&j) = lang_col.get(r.language.as_str()) {
            x[(i, j)] = 1.0;
        }
        if let Some(&j) = task_col.get(r.task_id().canonical()) {
            x[(i, j)] = 1.0;
        }
        y[i] = r.score;
    }
    (x, y)
}

/// Index of the first column linearly dependent on its predecessors, if any.
/// Modified Gram-Schmidt with one reorthogonalization pass.
fn first_dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let p = x.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut v = x.column(j).clone_owned();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return Some(j);
        }
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= RANK_TOL * norm0 {
            return Some(j);
        }
        basis.push(v / norm);
    }
    None
}

/// Profiled quantities at a fixed theta.
struct ProfilePoint {
    deviance: f64,
    beta: DVector<f64>,
    sigma2: f64,
    logdet: f64,
}

/// Whitens per model group, solves the least-squares problem by QR, and
/// profiles out sigma2. The whitening uses the closed-form inverse square
/// root of I + theta * 1 1', which subtracts a fraction of the group sum.
fn profile_at(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    groups: &[(String, Vec<usize>)],
    theta: f64,
) -> ProfilePoint {
    let n = y.len();
    let p = x.ncols();
    let mut wx = x.clone();
    let mut wy = y.clone();
    let mut logdet = 0.0;
    if theta > 0.0 {
        for (_, idx) in groups {
            let nm = idx.len() as f64;
            let shrink = (1.0 - 1.0 / (1.0 + theta * nm).sqrt()) / nm;
            for j in 0..p {
                let s: f64 = idx.iter().map(|&i| wx[(i, j)]).sum();
                if s != 0.0 {
                    for &i in idx {
                        wx[(i, j)] -= shrink * s;
                    }
                }
            }
            let s: f64 = idx.iter().map(|&i| wy[i]).sum();
            for &i in idx {
                wy[i] -= shrink * s;
            }
            logdet += (theta * nm).ln_1p();
        }
    }
    let qr = wx.clone().qr();
    let mut qty = wy.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = DVector::from_iterator(p, (0..p).map(|i| qty[i]));
    let beta = qr
        .r()
        .solve_upper_triangular(&rhs)
        .expect("design verified full rank");
    let resid = wy - wx * &beta;
    let sigma2 = resid.norm_squared() / n as f64;
    let deviance = if sigma2 > 0.0 {
        n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln() + logdet + n as f64
    } else {
        f64::NEG_INFINITY
    };
    ProfilePoint {
        deviance,
        beta,
        sigma2,
        logdet,
    }
}

/// Profile deviance (-2 log-likelihood with beta and sigma2 profiled out) of
/// a collection at a fixed variance ratio theta. Oracle and diagnostic
/// surface for the optimizer inside [`fit_lmm`].
pub fn profile_deviance(c: &RecordCollection, theta: f64) -> Result<f64> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::InvalidParameter {
            detail: format!("theta must be finite and non-negative, got {theta}"),
        });
    }
    let spec = encode_design(c)?;
    let (x, y) = build_matrices(c, &spec);
    check_solvable(&spec, &x)?;
    let point = profile_at(&x, &y, &spec.model_groups, theta);
    if point.sigma2 < DEGENERATE_SIGMA2 {
        return Err(Error::DegenerateFit {
            sigma2: point.sigma2,
        });
    }
    Ok(point.deviance)
}

fn check_solvable(spec: &DesignSpec, x: &DMatrix<f64>) -> Result<()> {
    let (n, p) = (spec.n, spec.column_count());
    if n < p {
        return Err(Error::Underdetermined {
            records: n,
            columns: p,
        });
    }
    if let Some(j) = first_dependent_column(x) {
        return Err(Error::SingularDesign {
            column: spec.column_label(j),
        });
    }
    Ok(())
}

/// A fitted random-intercept model.
///
/// Coefficient maps include the reference levels with coefficient exactly
/// zero. Residual and fitted-value vectors follow the record order of the
/// collection the model was fitted to.
#[derive(Debug, Clone)]
pub struct LmmFit {
    pub design: DesignSpec,
    /// Intercept: expected score of the reference (language, task) cell.
    pub mu: f64,
    /// Language offsets keyed by code; reference language maps to 0.
    pub alpha: BTreeMap<String, f64>,
    /// Task offsets keyed by task id; reference task maps to 0.
    pub beta: BTreeMap<TaskId, f64>,
    /// Predicted random intercept per model (BLUP at the fitted theta).
    pub u: BTreeMap<String, f64>,
    /// Variance ratio sigma2_u / sigma2_e.
    pub theta: f64,
    pub sigma2_e: f64,
    pub sigma2_u: f64,
    /// Maximized marginal log-likelihood (ML, not REML).
    pub loglik: f64,
    /// y - X beta, in record order.
    pub marginal_residuals: Vec<f64>,
    /// y - X beta - u_model, in record order.
    pub conditional_residuals: Vec<f64>,
    /// X beta + u_model, in record order.
    pub fitted_values: Vec<f64>,
}

impl LmmFit {
    pub fn reference_language(&self) -> &str {
        self.design.reference_language()
    }

    pub fn reference_task(&self) -> &TaskId {
        self.design.reference_task()
    }

    /// Expected score of a (language, task) cell under a typical model
    /// (the random effect at its mean of zero).
    pub fn predict_cell(&self, language: &str, task: &TaskId) -> Result<f64> {
        let alpha = self
            .alpha
            .get(language)
            .ok_or_else(|| Error::UnknownLevel {
                kind: "language".to_string(),
                value: language.to_string(),
            })?;
        let beta = self.beta.get(task).ok_or_else(|| Error::UnknownLevel {
            kind: "task".to_string(),
            value: task.canonical().to_string(),
        })?;
        Ok(self.mu + alpha + beta)
    }

    /// Canonical JSON document for the fit. Floating-point values carry 17
    /// significant digits, enough to reconstruct each f64 exactly; map keys
    /// appear in sorted order, so equal fits serialize byte-identically.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        write_f64_field(&mut s, 1, "mu", self.mu, true);
        write_map_field(
            &mut s,
            1,
            "alpha",
            self.alpha.iter().map(|(k, v)| (k.clone(), *v)),
            true,
        );
        write_map_field(
            &mut s,
            1,
            "beta",
            self.beta
                .iter()
                .map(|(k, v)| (k.canonical().to_string(), *v)),
            true,
        );
        write_f64_field(&mut s, 1, "sigma2_u", self.sigma2_u, true);
        write_f64_field(&mut s, 1, "sigma2_e", self.sigma2_e, true);
        write_f64_field(&mut s, 1, "theta", self.theta, true);
        write_f64_field(&mut s, 1, "loglik", self.loglik, true);
        write_map_field(
            &mut s,
            1,
            "u",
            self.u.iter().map(|(k, v)| (k.clone(), *v)),
            true,
        );
        let _ = writeln!(
            s,
            "  \"reference_language\": {},",
            json_string(self.design.reference_language())
        );
        let _ = writeln!(
            s,
            "  \"reference_task\": {}",
            json_string(self.design.reference_task().canonical())
        );
        s.push_str("}\n");
        s
    }
}

/// f64 to decimal with 17 significant digits (round-trip exact).
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_f64_field(s: &mut String, indent: usize, key: &str, v: f64, comma: bool) {
    let _ = writeln!(
        s,
        "{}\"{}\": {}{}",
        "  ".repeat(indent),
        key,
        fmt_f64(v),
        if comma { "," } else { "" }
    );
}

fn write_map_field<I: Iterator<Item = (String, f64)>>(
    s: &mut String,
    indent: usize,
    key: &str,
    entries: I,
    comma: bool,
) {
    let pad = "  ".repeat(indent);
    let _ = writeln!(s, "{pad}\"{key}\": {{");
    let entries: Vec<_> = entries.collect();
    for (i, (k, v)) in entries.iter().enumerate() {
        let _ = writeln!(
            s,
            "{pad}  {}: {}{}",
            json_string(k),
            fmt_f64(*v),
            if i + 1 < entries.len() { "," } else { "" }
        );
    }
    let _ = writeln!(s, "{pad}}}{}", if comma { "," } else { "" });
}

/// Fits the random-intercept model by profile maximum likelihood.
///
/// The deviance is minimized over log(theta) with a coarse grid bracket and
/// golden-section refinement, and the theta = 0 boundary (no model effect)
/// is always evaluated and kept if it is at least as good. When no model
/// group has two records, theta is unidentifiable and pinned to zero.
pub fn fit_lmm(c: &RecordCollection) -> Result<LmmFit> {
    let spec = encode_design(c)?;
    let (x, y) = build_matrices(c, &spec);
    check_solvable(&spec, &x)?;
    let groups = &spec.model_groups;

    let eval = |theta: f64| profile_at(&x, &y, groups, theta).deviance;

    let identifiable = groups.iter().any(|(_, idx)| idx.len() >= 2);
    let theta_hat = if identifiable {
        let boundary = eval(0.0);
        let (theta_interior, interior) = minimize_log_theta(&eval);
        if boundary <= interior {
            0.0
        } else {
            theta_interior
        }
    } else {
        0.0
    };

    let point = profile_at(&x, &y, groups, theta_hat);
    if point.sigma2 < DEGENERATE_SIGMA2 {
        return Err(Error::DegenerateFit {
            sigma2: point.sigma2,
        });
    }

    finish_fit(c, spec, &x, &y, theta_hat, point)
}

/// Grid bracket plus golden-section descent on t = log(theta).
/// Returns (theta, deviance) at the best interior point found.
fn minimize_log_theta(eval: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let t_lo = THETA_MIN.ln();
    let t_hi = THETA_MAX.ln();
    let step = (t_hi - t_lo) / (GRID_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best_f = f64::INFINITY;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| t_lo + step * i as f64).collect();
    for (i, &t) in grid.iter().enumerate() {
        let f = eval(t.exp());
        if f < best_f {
            best_f = f;
            best_i = i;
        }
    }
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(GRID_POINTS - 1)];

    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let mut h = b - a;
    let mut c = a + INVPHI2 * h;
    let mut d = a + INVPHI * h;
    let mut fc = eval(c.exp());
    let mut fd = eval(d.exp());
    for _ in 0..300 {
        if (fc - fd).abs() <= DEVIANCE_TOL || h <= 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            h = b - a;
            c = a + INVPHI2 * h;
            fc = eval(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            h = b - a;
            d = a + INVPHI * h;
            fd = eval(d.exp());
        }
    }
    let (t_best, f_best) = if fc <= fd { (c, fc) } else { (d, fd) };
    if best_f < f_best {
        (grid[best_i].exp(), best_f)
    } else {
        (t_best.exp(), f_best)
    }
}

fn finish_fit(
    c: &RecordCollection,
    spec: DesignSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    theta: f64,
    point: ProfilePoint,
) -> Result<LmmFit> {
    let n = spec.n;
    let marginal = y - x * &point.beta;

    let mut u = BTreeMap::new();
    for (model, idx) in &spec.model_groups {
        let s: f64 = idx.iter().map(|&i| marginal[i]).sum();
        let nm = idx.len() as f64;
        u.insert(model.clone(), theta * s / (1.0 + theta * nm));
    }

    let mut conditional = vec![0.0; n];
    let mut fitted = vec![0.0; n];
    for (model, idx) in &spec.model_groups {
        let um = u[model];
        for &i in idx {
            conditional[i] = marginal[i] - um;
            fitted[i] = y[i] - conditional[i];
        }
    }

    let mut alpha = BTreeMap::new();
    alpha.insert(spec.reference_language.clone(), 0.0);
    for (j, lang) in spec.language_columns.iter().enumerate() {
        alpha.insert(lang.clone(), point.beta[1 + j]);
    }
    let mut beta_map = BTreeMap::new();
    beta_map.insert(spec.reference_task.clone(), 0.0);
    let nl = spec.language_columns.len();
    for (j, task) in spec.task_columns.iter().enumerate() {
        beta_map.insert(task.clone(), point.beta[1 + nl + j]);
    }

    let loglik = -0.5
        * (n as f64 * (2.0 * std::f64::consts::PI * point.sigma2).ln() + point.logdet + n as f64);

    debug_assert_eq!(c.len(), n);
    Ok(LmmFit {
        mu: point.beta[0],
        alpha,
        beta: beta_map,
        u,
        theta,
        sigma2_e: point.sigma2,
        sigma2_u: theta * point.sigma2,
        loglik,
        marginal_residuals: marginal.iter().copied().collect(),
        conditional_residuals: conditional,
        fitted_values: fitted,
        design: spec,
    })
}
