//! Sloppiness analysis: log-parameter sensitivities of the output series,
//! the Gauss-Newton Hessian of the normalized square loss and its
//! eigendecomposition. Also the hyperinflation phase scan.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::Month;
use crate::econ::{annualize, MonthRecord};
use crate::error::{Error, Result};
use crate::policy::Regime;
use crate::runner::{run_seed, RunOutput, COLLAPSE_UNEMPLOYMENT};
use crate::scenario::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    /// Perceived inflation compounded to a yearly rate.
    Inflation,
    Unemployment,
}

impl Output {
    pub fn value(self, r: &MonthRecord) -> f64 {
        match self {
            Output::Inflation => annualize(r.inflation_ema),
            Output::Unemployment => r.unemployment,
        }
    }
}

/// Scalars that enter the model dynamics, by dotted config path.
pub const MODEL_PARAMETERS: [&str; 22] = [
    "parameters.hire_fire_ratio",
    "parameters.firing_rate",
    "parameters.theta0",
    "parameters.gamma0",
    "parameters.alpha_gamma",
    "parameters.alpha_c",
    "parameters.c0",
    "parameters.gamma",
    "parameters.g_w",
    "parameters.g_p",
    "parameters.g_e",
    "parameters.y0",
    "parameters.dividend_rate",
    "parameters.energy_payout",
    "parameters.revival_prob",
    "parameters.omega",
    "central_bank.natural_rate",
    "central_bank.taylor_strength",
    "central_bank.target",
    "central_bank.anchor",
    "central_bank.trust_sensitivity",
    "interventions.easy_credit.multiplier",
];

/// Parameters of `config` that are positive and used by its regime and
/// interventions. Zero-valued ones cannot be perturbed in log space.
pub fn active_parameters(config: &ScenarioConfig) -> Vec<String> {
    let regime = config.central_bank.regime;
    MODEL_PARAMETERS
        .iter()
        .filter(|path| match **path {
            "central_bank.anchor" => regime == Regime::AnchoredTrust,
            "central_bank.trust_sensitivity" => regime == Regime::FloatingTrust,
            "interventions.easy_credit.multiplier" => config.interventions.easy_credit.enabled,
            _ => true,
        })
        .filter(|path| config.get_f64(path).is_ok_and(|v| v > 0.0))
        .map(|p| p.to_string())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub outputs: Vec<Output>,
    pub seeds: Vec<u64>,
    pub window_start: Month,
    pub window_months: u32,
    /// Log-space step.
    pub epsilon: f64,
    /// Dotted config paths; empty selects [`active_parameters`].
    pub parameters: Vec<String>,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            outputs: vec![Output::Inflation, Output::Unemployment],
            seeds: (1..=50).collect(),
            window_start: Month::new(2019, 2),
            window_months: 132,
            epsilon: 0.01,
            parameters: Vec::new(),
        }
    }
}

/// A probe that failed; its seed is left out of the Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedProbe {
    pub seed: u64,
    pub parameter: String,
    pub reason: String,
}

/// Normalized sensitivities `dy/dlog(theta) / ||y||`, one block of `window`
/// values per (seed, output) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jacobian {
    pub parameters: Vec<String>,
    pub blocks: Vec<(u64, Output)>,
    pub window: usize,
    /// `columns[i]` holds parameter `i`, blocks laid end to end.
    pub columns: Vec<Vec<f64>>,
    pub flagged: Vec<FlaggedProbe>,
}

/// Central differences in log space for a generic model returning one series
/// per output. `model(x, seed)` receives log-parameters. A seed whose base or
/// perturbed evaluation fails, changes length or turns non-finite is flagged
/// and dropped.
pub fn finite_difference<F>(
    names: &[String],
    log_params: &[f64],
    outputs: &[Output],
    seeds: &[u64],
    epsilon: f64,
    model: F,
) -> Result<Jacobian>
where
    F: Fn(&[f64], u64) -> Result<Vec<Vec<f64>>> + Sync,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::config("epsilon", "must be > 0"));
    }
    assert_eq!(names.len(), log_params.len());
    let p = log_params.len();
    // Job 0 of a seed is the base point, then (+, -) per parameter.
    let jobs: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..=2 * p).map(move |j| (s, j)))
        .collect();
    let results: Vec<Result<Vec<Vec<f64>>>> = jobs
        .par_iter()
        .map(|&(s, j)| {
            let mut x = log_params.to_vec();
            if j > 0 {
                let i = (j - 1) / 2;
                x[i] += if j % 2 == 1 { epsilon } else { -epsilon };
            }
            model(&x, s)
        })
        .collect();

    let mut window = None;
    let mut blocks = Vec::new();
    let mut columns = vec![Vec::new(); p];
    let mut flagged = Vec::new();
    for (n, &seed) in seeds.iter().enumerate() {
        let chunk = &results[n * (2 * p + 1)..(n + 1) * (2 * p + 1)];
        let probe_name = |j: usize| if j == 0 { "base".to_string() } else { names[(j - 1) / 2].clone() };
        let mut bad = None;
        for (j, r) in chunk.iter().enumerate() {
            let reason = match r {
                Err(e) => Some(e.to_string()),
                Ok(ys) if ys.len() != outputs.len() => Some("wrong number of outputs".into()),
                Ok(ys) if ys.iter().flatten().any(|v| !v.is_finite()) => Some("non-finite output".into()),
                Ok(ys) => {
                    let t = ys[0].len();
                    if ys.iter().any(|y| y.len() != t) || window.is_some_and(|w| w != t) {
                        Some("series length differs".into())
                    } else {
                        None
                    }
                }
            };
            if let Some(reason) = reason {
                bad = Some(FlaggedProbe {
                    seed,
                    parameter: probe_name(j),
                    reason,
                });
                break;
            }
        }
        if let Some(b) = bad {
            flagged.push(b);
            continue;
        }
        let base = chunk[0].as_ref().expect("checked");
        window.get_or_insert(base[0].len());
        for (k, &out) in outputs.iter().enumerate() {
            let norm = base[k].iter().map(|v| v * v).sum::<f64>().sqrt();
            blocks.push((seed, out));
            for (i, col) in columns.iter_mut().enumerate() {
                let plus = &chunk[1 + 2 * i].as_ref().expect("checked")[k];
                let minus = &chunk[2 + 2 * i].as_ref().expect("checked")[k];
                col.extend(plus.iter().zip(minus).map(|(a, b)| {
                    let d = (a - b) / (2.0 * epsilon);
                    if norm > 0.0 {
                        d / norm
                    } else {
                        0.0
                    }
                }));
            }
        }
    }
    Ok(Jacobian {
        parameters: names.to_vec(),
        blocks,
        window: window.unwrap_or(0),
        columns,
        flagged,
    })
}

/// Sensitivities of the simulator. Every probe of a seed uses the same
/// random stream, so differences reflect the parameter change only.
pub fn jacobian(spec: &LossSpec, base: &ScenarioConfig) -> Result<Jacobian> {
    base.validate()?;
    let names = if spec.parameters.is_empty() {
        active_parameters(base)
    } else {
        spec.parameters.clone()
    };
    let mut log_params = Vec::with_capacity(names.len());
    for name in &names {
        let v = base.get_f64(name)?;
        if !(v > 0.0) {
            return Err(Error::config(name, format!("must be > 0 for a log perturbation, got {v}")));
        }
        log_params.push(v.ln());
    }
    let start = spec.window_start;
    let end = start.offset(spec.window_months as i32);
    if start < base.run.start || end > base.run.end() {
        return Err(Error::config(
            "window",
            format!(
                "{start}..{end} is not inside the recorded months {}..{}",
                base.run.start,
                base.run.end()
            ),
        ));
    }
    if spec.seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let model = |x: &[f64], seed: u64| -> Result<Vec<Vec<f64>>> {
        let mut c = base.clone();
        for (name, v) in names.iter().zip(x) {
            c.set_f64(name, v.exp())?;
        }
        let out = run_seed(&c, seed, None)?;
        if let Some(m) = out.runaway {
            return Err(Error::config("run", format!("runaway inflation at {m}")));
        }
        let window: Vec<&MonthRecord> = out.records.iter().filter(|r| r.month >= start && r.month < end).collect();
        Ok(spec
            .outputs
            .iter()
            .map(|&o| window.iter().map(|r| o.value(r)).collect())
            .collect())
    };
    finite_difference(&names, &log_params, &spec.outputs, &spec.seeds, spec.epsilon, model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub parameters: Vec<String>,
    pub outputs: Vec<Output>,
    pub matrix: Vec<Vec<f64>>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors in the order of `eigenvalues`; the largest-magnitude
    /// component of each is positive.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Root-mean-square of each parameter's normalized sensitivity.
    pub jacobian_norms: Vec<f64>,
    /// Number of (seed, output, month) terms averaged.
    pub samples: usize,
}

/// `H_ij = mean over (s, k, t) of J_i J_j`, restricted to `outputs`.
pub fn hessian(jac: &Jacobian, outputs: &[Output]) -> HessianReport {
    let p = jac.parameters.len();
    let t = jac.window;
    let rows: Vec<usize> = jac
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| outputs.contains(o))
        .flat_map(|(b, _)| b * t..(b + 1) * t)
        .collect();
    let n = rows.len();
    let mut h = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let s: f64 = rows.iter().map(|&r| jac.columns[i][r] * jac.columns[j][r]).sum();
            let v = if n > 0 { s / n as f64 } else { 0.0 };
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let (eigenvalues, eigenvectors) = eigen_descending(&h);
    HessianReport {
        parameters: jac.parameters.clone(),
        outputs: outputs.to_vec(),
        matrix: (0..p).map(|i| (0..p).map(|j| h[(i, j)]).collect()).collect(),
        eigenvalues,
        eigenvectors,
        jacobian_norms: (0..p).map(|i| h[(i, i)].sqrt()).collect(),
        samples: n,
    }
}

fn eigen_descending(h: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = h.nrows();
    if p == 0 {
        return (Vec::new(), Vec::new());
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v
            }
        })
        .collect();
    (values, vectors)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub eigenvalue: f64,
    /// `(parameter, component)`, largest magnitude first.
    pub components: Vec<(String, f64)>,
}

/// The `n` stiffest directions with their components labeled.
pub fn stiff_directions(report: &HessianReport, n: usize) -> Vec<Direction> {
    report
        .eigenvalues
        .iter()
        .zip(&report.eigenvectors)
        .take(n)
        .map(|(&eigenvalue, v)| {
            let mut components: Vec<(String, f64)> =
                report.parameters.iter().cloned().zip(v.iter().copied()).collect();
            components.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            Direction { eigenvalue, components }
        })
        .collect()
}

/// Decades between the largest eigenvalue and the smallest positive one.
pub fn spectrum_decades(eigenvalues: &[f64]) -> f64 {
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    if max > 0.0 && min.is_finite() {
        (max / min).log10()
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Stable,
    Hyperinflation,
    Collapse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Yearly perceived inflation above which a still-rising run is hyperinflationary.
    pub hyperinflation: f64,
    /// Months over which inflation must still be rising.
    pub rising_months: usize,
    /// Mean unemployment over the final year above which a run has collapsed.
    pub collapse: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            hyperinflation: 0.5,
            rising_months: 24,
            collapse: COLLAPSE_UNEMPLOYMENT,
        }
    }
}

/// Phase of one run. A run stopped on runaway inflation is hyperinflationary.
pub fn classify(output: &RunOutput, th: &Thresholds) -> Phase {
    if output.runaway.is_some() {
        return Phase::Hyperinflation;
    }
    let r = &output.records;
    let Some(last) = r.last() else {
        return Phase::Stable;
    };
    let before = &r[r.len().saturating_sub(th.rising_months + 1)];
    let now = annualize(last.inflation_ema);
    if now > th.hyperinflation && now > annualize(before.inflation_ema) {
        return Phase::Hyperinflation;
    }
    let tail = &r[r.len().saturating_sub(12)..];
    let u = tail.iter().map(|x| x.unemployment).sum::<f64>() / tail.len() as f64;
    if u > th.collapse {
        Phase::Collapse
    } else {
        Phase::Stable
    }
}

/// Grid over `g = g_p = g_w` and one more scalar, usually the anchoring
/// weight or the trust sensitivity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub g: Vec<f64>,
    pub axis: String,
    pub axis_values: Vec<f64>,
    /// Shared by every cell.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub g: f64,
    pub axis_value: f64,
    pub phase: Phase,
    pub stable: usize,
    pub hyperinflation: usize,
    pub collapse: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub grid: PhaseGrid,
    pub thresholds: Thresholds,
    /// Row-major: one row per axis value, `g` varying fastest.
    pub cells: Vec<PhaseCell>,
    /// `(axis_value, g)` of cells that are not hyperinflationary although a
    /// smaller `g` on the same row is. Usually ensemble noise.
    pub violations: Vec<(f64, f64)>,
}

impl PhaseMap {
    pub fn cell(&self, axis_value: f64, g: f64) -> Option<&PhaseCell> {
        self.cells.iter().find(|c| c.axis_value == axis_value && c.g == g)
    }
}

/// Classify every cell by the majority phase of its runs; ties go to the
/// more extreme phase (hyperinflation, then collapse).
pub fn phase_scan(base: &ScenarioConfig, grid: &PhaseGrid, th: &Thresholds) -> Result<PhaseMap> {
    if grid.g.is_empty() || grid.axis_values.is_empty() || grid.seeds.is_empty() {
        return Err(Error::config("grid", "needs at least one g, one axis value and one seed"));
    }
    if let Some(g) = grid.g.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::config("grid.g", format!("values must be > 0, got {g}")));
    }
    let mut configs = Vec::new();
    for &a in &grid.axis_values {
        for &g in &grid.g {
            let mut c = base.clone();
            c.set_f64("parameters.g_p", g)?;
            c.set_f64("parameters.g_w", g)?;
            c.set_f64(&grid.axis, a)?;
            c.validate()?;
            configs.push((a, g, c));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| grid.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let phases: Vec<(usize, Option<Phase>)> = jobs
        .par_iter()
        .map(|&(i, s)| (i, run_seed(&configs[i].2, s, None).ok().map(|o| classify(&o, th))))
        .collect();
    let mut cells = Vec::with_capacity(configs.len());
    for (i, (a, g, _)) in configs.iter().enumerate() {
        let mut cell = PhaseCell {
            g: *g,
            axis_value: *a,
            phase: Phase::Stable,
            stable: 0,
            hyperinflation: 0,
            collapse: 0,
            failed: 0,
        };
        for (_, p) in phases.iter().filter(|(j, _)| *j == i) {
            match p {
                Some(Phase::Stable) => cell.stable += 1,
                Some(Phase::Hyperinflation) => cell.hyperinflation += 1,
                Some(Phase::Collapse) => cell.collapse += 1,
                None => cell.failed += 1,
            }
        }
        cell.phase = if cell.hyperinflation >= cell.collapse && cell.hyperinflation >= cell.stable {
            Phase::Hyperinflation
        } else if cell.collapse >= cell.stable {
            Phase::Collapse
        } else {
            Phase::Stable
        };
        cells.push(cell);
    }
    let mut violations = Vec::new();
    for row in cells.chunks(grid.g.len()) {
        let mut seen = false;
        for c in row {
            if c.phase == Phase::Hyperinflation {
                seen = true;
            } else if seen {
                violations.push((c.axis_value, c.g));
            }
        }
    }
    Ok(PhaseMap {
        grid: grid.clone(),
        thresholds: th.clone(),
        cells,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn quadratic_in_log_is_exact() {
        // y = (log theta)^2 has derivative 2 log theta.
        let x = [0.7f64.ln()];
        let jac = finite_difference(&names(1), &x, &[Output::Inflation], &[1], 0.01, |x, _| {
            Ok(vec![vec![x[0] * x[0]]])
        })
        .unwrap();
        let norm = (x[0] * x[0]).abs();
        assert_abs_diff_eq!(jac.columns[0][0] * norm, 2.0 * x[0], epsilon = 1e-12);
    }

    #[test]
    fn rank_one_jacobian_has_one_nonzero_eigenvalue() {
        let jac = finite_difference(&names(3), &[0.0, 0.1, 0.2], &[Output::Inflation], &[1], 0.01, |x, _| {
            Ok(vec![vec![1.0 + x[0] + 2.0 * x[1] - x[2]]])
        })
        .unwrap();
        let h = hessian(&jac, &[Output::Inflation]);
        assert!(h.eigenvalues[0] > 1e-3);
        for v in &h.eigenvalues[1..] {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn two_parameter_linear_model_by_hand() {
        // y_t = c_t + a_t x0 + b_t x1 at x = 0: J = [a b] / ||c||.
        let a = [1.0, 2.0];
        let b = [0.5, -1.0];
        let c = [3.0, 4.0];
        let jac = finite_difference(&names(2), &[0.0, 0.0], &[Output::Unemployment], &[7], 0.01, |x, _| {
            Ok(vec![(0..2).map(|t| c[t] + a[t] * x[0] + b[t] * x[1]).collect()])
        })
        .unwrap();
        let h = hessian(&jac, &[Output::Unemployment]);
        // ||c||^2 = 25, S K T = 2
        let expect = [[5.0 / 50.0, -1.5 / 50.0], [-1.5 / 50.0, 1.25 / 50.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(h.matrix[i][j], expect[i][j], epsilon = 1e-12);
            }
        }
        assert_eq!(h.samples, 2);
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_sorted() {
        let jac = finite_difference(&names(3), &[0.1, -0.2, 0.3], &[Output::Inflation], &[1, 2], 0.01, |x, s| {
            let s = s as f64;
            Ok(vec![(0..5).map(|t| {
                let t = t as f64;
                (x[0] * t).sin() + s * x[1] * x[1] + (x[2] * (t + s)).cos()
            }).collect()])
        })
        .unwrap();
        let h = hessian(&jac, &[Output::Inflation]);
        for w in h.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for (i, u) in h.eigenvectors.iter().enumerate() {
            for (j, v) in h.eigenvectors.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                assert_abs_diff_eq!(dot, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-8);
            }
        }
        let dirs = stiff_directions(&h, 3);
        for d in dirs {
            let sq: f64 = d.components.iter().map(|(_, c)| c * c).sum();
            assert_abs_diff_eq!(sq, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn failing_seed_is_flagged_and_dropped() {
        let jac = finite_difference(&names(1), &[0.0], &[Output::Inflation], &[1, 2], 0.01, |x, s| {
            if s == 2 && x[0] > 0.0 {
                Err(Error::NoActiveFirms)
            } else {
                Ok(vec![vec![x[0].exp()]])
            }
        })
        .unwrap();
        assert_eq!(jac.blocks, vec![(1, Output::Inflation)]);
        assert_eq!(jac.flagged.len(), 1);
        assert_eq!(jac.flagged[0].seed, 2);
        assert_eq!(jac.flagged[0].parameter, "p0");
    }

    #[test]
    fn decades() {
        assert_abs_diff_eq!(spectrum_decades(&[100.0, 1.0, 0.01, 0.0]), 4.0, epsilon = 1e-12);
        assert_eq!(spectrum_decades(&[]), 0.0);
    }

    #[test]
    fn inactive_regime_parameters() {
        let c = ScenarioConfig::preset("inactive").unwrap();
        let p = active_parameters(&c);
        assert!(p.contains(&"parameters.g_w".to_string()));
        assert!(!p.iter().any(|x| x == "parameters.gamma0" || x == "central_bank.target"));
        assert!(!p.iter().any(|x| x.starts_with("interventions")));
        let f = ScenarioConfig::preset("floating").unwrap();
        assert!(active_parameters(&f).contains(&"central_bank.trust_sensitivity".to_string()));
    }
}
