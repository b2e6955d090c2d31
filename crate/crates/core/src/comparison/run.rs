//! Long orbit runs of the section map with simultaneous QR spectrum and
//! comparison-cocycle bookkeeping.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ball_volume, check_aligned, cycle_factors, i_integral, ComparisonRecord, Regime};
use crate::error::{invalid, Result};
use crate::linalg::qr3_in_place;
use crate::model::CatSuspension;
use crate::perturbation::PerturbedField;
use crate::spectrum::stats::{BatchMeans, DEFAULT_BLOCKS};
use crate::spectrum::{random_frame, ExponentAccumulator, SpectrumEstimate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn of(b: &BatchMeans) -> Self {
        Estimate { mean: b.mean(), stderr: b.stderr() }
    }

    /// Ensemble estimate: the larger of the pooled within-orbit error and
    /// the between-orbit scatter.
    pub fn pool(parts: &[Estimate]) -> Self {
        let n = parts.len() as f64;
        let means: Vec<f64> = parts.iter().map(|e| e.mean).collect();
        let mean = crate::spectrum::stats::mean(&means);
        let within = parts.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / n;
        let between = if parts.len() > 1 { crate::spectrum::stats::stderr_of_means(&means) } else { 0.0 };
        Estimate { mean, stderr: within.max(between) }
    }

    /// Standard error of a difference of independent estimates.
    pub fn combined(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Section steps (time units) accumulated after the burn-in.
    pub steps: usize,
    pub burn_in: usize,
    pub keep_records: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { steps: 1_000_000, burn_in: 1_000, keep_records: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitRun {
    pub run_id: u64,
    pub start: [f64; 3],
    pub spectrum: SpectrumEstimate,
    /// Time average of `log γ` with the true correction `A`.
    pub sigma_phi: Estimate,
    /// Same with the closed-form correction.
    pub sigma_phi_closed: Estimate,
    /// Time average of `log λ₊ − log γ` over box transits.
    pub forward: Estimate,
    pub box_entries: usize,
    pub backward_crossings: usize,
    pub max_log_a: f64,
    pub max_log_a_closed: f64,
    pub min_tau: Option<usize>,
    #[serde(skip)]
    pub records: Vec<ComparisonRecord>,
}

struct Pending {
    entered: usize,
    log_a: f64,
    log_a_closed: f64,
}

fn start_point(seed: u64, run_id: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(run_id));
    [rng.gen(), rng.gen(), rng.gen()]
}

/// One orbit of `Y` (or of `X` when `field` is `None`) on the section.
pub fn run_orbit(
    sys: &CatSuspension,
    field: Option<&PerturbedField>,
    start: [f64; 3],
    settings: &RunSettings,
    run_id: u64,
    seed: u64,
) -> Result<OrbitRun> {
    if settings.steps == 0 {
        return Err(invalid("a run needs at least one step"));
    }
    if let Some(f) = field {
        check_aligned(f)?;
    }
    let mut lift = Matrix3::identity();
    lift.fixed_view_mut::<2, 2>(0, 0).copy_from(&sys.matrix());
    let lnl = sys.lambda_u().ln();
    let frame = random_frame(3, seed ^ run_id.rotate_left(17))?;
    let mut q = Matrix3::from_fn(|i, j| frame[(i, j)]);
    let mut b = start;
    let r = field.map_or(0.0, |f| f.spec().r);

    // Returns the next base point, its transverse coordinates, and the step data.
    let step = |b: &[f64; 3], w: &Vector3<f64>| match field {
        Some(f) => {
            let st = f.section_step_at(b, w);
            (st.base, f.chart().transverse(&st.base), st.matrix, st.entry, st.theta)
        }
        None => (sys.map(*b), Vector3::zeros(), lift, None, 0.0),
    };
    let mut w = field.map_or(Vector3::zeros(), |f| f.chart().transverse(&b));

    for _ in 0..settings.burn_in {
        let (nb, nw, m, _, _) = step(&b, &w);
        q = m * q;
        qr3_in_place(&mut q)?;
        b = nb;
        w = nw;
    }

    let n = settings.steps;
    let mut acc = ExponentAccumulator::new(3, n, 1.0);
    let mut phi = BatchMeans::new(n, DEFAULT_BLOCKS);
    let mut phi_closed = BatchMeans::new(n, DEFAULT_BLOCKS);
    let mut forward = BatchMeans::new(n, DEFAULT_BLOCKS);
    let mut records = vec![];
    let mut pending: Option<Pending> = None;
    let (mut entries, mut backs) = (0, 0);
    let (mut max_a, mut max_a_closed) = (0.0f64, 0.0f64);
    let mut min_tau: Option<usize> = None;

    for k in 0..n {
        let (nb, nw, m, entry, theta) = step(&b, &w);
        let v: Vector3<f64> = q.column(0).into_owned();
        let mut y = m * q;
        let diag = qr3_in_place(&mut y)?;
        let log_det = if entry.is_some() { m.determinant().abs().ln() } else { 0.0 };
        acc.push(&[diag[0].ln(), diag[1].ln(), diag[2].ln()], log_det);
        q = y;

        let backward = entry.is_none() && field.is_some() && nw.norm_squared() < r * r;
        let (mut lg, mut lg_closed, mut fw) = (lnl, lnl, 0.0);
        if let (Some(w), Some(f)) = (entry, field) {
            let c = cycle_factors(f, &v, &m, theta, w.norm())?;
            let lc = theta.cos().ln();
            lg += lc;
            lg_closed += lc;
            fw = -lc;
            entries += 1;
            pending = Some(Pending { entered: k, log_a: c.a_def.ln(), log_a_closed: c.a_closed.ln() });
            if settings.keep_records {
                records.push(ComparisonRecord {
                    run_id,
                    t_enter: k as f64,
                    regime: Regime::InsideForward,
                    gamma: lg.exp(),
                    tau: None,
                    a: None,
                });
            }
        } else if backward {
            backs += 1;
            let (la, la_closed, tau) = match pending.take() {
                Some(p) => (p.log_a, p.log_a_closed, Some(k - p.entered)),
                None => (0.0, 0.0, None),
            };
            lg += la;
            lg_closed += la_closed;
            max_a = max_a.max(la.abs());
            max_a_closed = max_a_closed.max(la_closed.abs());
            if let Some(t) = tau {
                min_tau = Some(min_tau.map_or(t, |m| m.min(t)));
            }
            if settings.keep_records {
                records.push(ComparisonRecord {
                    run_id,
                    t_enter: k as f64,
                    regime: Regime::InsideBackward,
                    gamma: lg.exp(),
                    tau: tau.map(|t| t as f64),
                    a: Some(la.exp()),
                });
            }
        }
        phi.push(lg);
        phi_closed.push(lg_closed);
        forward.push(fw);
        b = nb;
        w = nw;
    }
    // The last transit's correction is booked at the end of the run.
    if let Some(p) = pending {
        phi.add_to_current(p.log_a);
        phi_closed.add_to_current(p.log_a_closed);
    }

    Ok(OrbitRun {
        run_id,
        start,
        spectrum: acc.finish()?,
        sigma_phi: Estimate::of(&phi),
        sigma_phi_closed: Estimate::of(&phi_closed),
        forward: Estimate::of(&forward),
        box_entries: entries,
        backward_crossings: backs,
        max_log_a: max_a,
        max_log_a_closed: max_a_closed,
        min_tau,
        records,
    })
}

/// `orbits` independent runs in parallel; orbit `i` starts from a point and
/// frame drawn from `(seed, i)`, so runs of `X` and `Y` are matched.
pub fn run_ensemble(
    sys: &CatSuspension,
    field: Option<&PerturbedField>,
    orbits: usize,
    settings: &RunSettings,
    seed: u64,
) -> Result<Vec<OrbitRun>> {
    (0..orbits as u64)
        .into_par_iter()
        .map(|i| run_orbit(sys, field, start_point(seed, i), settings, i, seed))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub orbits: usize,
    pub steps: usize,
    /// Unstable, central and stable exponents.
    pub exponents: [Estimate; 3],
    pub log_det_rate: f64,
    pub sigma_phi: Estimate,
    pub sigma_phi_closed: Estimate,
    pub forward: Estimate,
    pub box_entries: usize,
    pub backward_crossings: usize,
    pub max_log_a: f64,
    pub max_log_a_closed: f64,
    pub min_tau: Option<usize>,
}

pub fn merge_runs(runs: &[OrbitRun]) -> Result<EnsembleSummary> {
    if runs.is_empty() {
        return Err(invalid("no runs to merge"));
    }
    let pick = |f: &dyn Fn(&OrbitRun) -> Estimate| Estimate::pool(&runs.iter().map(f).collect::<Vec<_>>());
    let exp = |i: usize| pick(&|r: &OrbitRun| Estimate { mean: r.spectrum.raw[i], stderr: r.spectrum.raw_stderr[i] });
    Ok(EnsembleSummary {
        orbits: runs.len(),
        steps: runs[0].spectrum.horizon as usize,
        exponents: [exp(0), exp(1), exp(2)],
        log_det_rate: runs.iter().map(|r| r.spectrum.log_det_rate).sum::<f64>() / runs.len() as f64,
        sigma_phi: pick(&|r| r.sigma_phi),
        sigma_phi_closed: pick(&|r| r.sigma_phi_closed),
        forward: pick(&|r| r.forward),
        box_entries: runs.iter().map(|r| r.box_entries).sum(),
        backward_crossings: runs.iter().map(|r| r.backward_crossings).sum(),
        max_log_a: runs.iter().map(|r| r.max_log_a).fold(0.0, f64::max),
        max_log_a_closed: runs.iter().map(|r| r.max_log_a_closed).fold(0.0, f64::max),
        min_tau: runs.iter().filter_map(|r| r.min_tau).min(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentAudit {
    pub r: f64,
    pub xi: f64,
    pub sigma_u_x: Estimate,
    pub sigma_u_phi: Estimate,
    pub sigma_u_phi_closed: Estimate,
    pub sigma_u_y: Estimate,
    pub i1: f64,
    pub vol_ratio: f64,
    /// `−vol_ratio·I(1)`.
    pub predicted_gap: f64,
    /// Measured `Σ_X^u − Σ_Φ^u`.
    pub measured_gap: Estimate,
    /// Box-transit accumulation of `log λ₊ − log γ`.
    pub forward: Estimate,
    pub max_log_a: f64,
    pub max_log_a_closed: f64,
    pub backward_crossings: usize,
    pub tau_r: Option<usize>,
    /// Bound on the fractional-time multiplier `a(·)`.
    pub c_a: f64,
    /// Domination constant and rate for the central/unstable pair.
    pub c2: f64,
    pub sigma: f64,
    /// `|Σ_Y^u − Σ_Φ^u| ≤ 3·combined stderr`.
    pub le_holds: bool,
    /// Forward accumulation within `3·stderr` of `−vol_ratio·I(1)`.
    pub forward_holds: bool,
    /// `Σ_X^u − Σ_Φ^u ≥ −vol_ratio·(I(1) + max log A) − 3·stderr`.
    pub lower_bound_holds: bool,
    pub sign_holds: bool,
    /// `|Σ_Y^s − Σ_X^s| ≤ 3·combined stderr`; informational.
    pub stable_sums_match: bool,
}

/// Assembles the exponent audit from matched ensembles of `X` and `Y`.
pub fn audit_from(field: &PerturbedField, x: &EnsembleSummary, y: &EnsembleSummary) -> Result<ExponentAudit> {
    let spec = field.spec();
    let i1 = i_integral(&field.chart_field().profiles, spec.xi, 3)?;
    let vol_ratio = ball_volume(3, spec.r);
    let predicted_gap = -vol_ratio * i1;
    let sx = x.exponents[0];
    let sy = y.exponents[0];
    let phi = y.sigma_phi;
    let gap = Estimate { mean: sx.mean - phi.mean, stderr: sx.combined(&phi) };
    let le_holds = (sy.mean - phi.mean).abs() <= 3.0 * sy.combined(&phi);
    let forward_holds = (y.forward.mean - predicted_gap).abs() <= 3.0 * y.forward.stderr;
    let lower = -vol_ratio * (i1 + y.max_log_a);
    let lower_bound_holds = gap.mean >= lower - 3.0 * gap.stderr;
    let sign_holds = spec.xi == 0.0 || y.box_entries == 0 || (phi.mean < sx.mean && y.sigma_phi_closed.mean < sx.mean);
    let stable_sums_match = (y.exponents[2].mean - x.exponents[2].mean).abs() <= 3.0 * y.exponents[2].combined(&x.exponents[2]);
    let lu = field.base().lambda_u();
    Ok(ExponentAudit {
        r: spec.r,
        xi: spec.xi,
        sigma_u_x: sx,
        sigma_u_phi: phi,
        sigma_u_phi_closed: y.sigma_phi_closed,
        sigma_u_y: sy,
        i1,
        vol_ratio,
        predicted_gap,
        measured_gap: gap,
        forward: y.forward,
        max_log_a: y.max_log_a,
        max_log_a_closed: y.max_log_a_closed,
        backward_crossings: y.backward_crossings,
        tau_r: y.min_tau,
        c_a: lu,
        c2: 1.0,
        sigma: 1.0 / lu,
        le_holds,
        forward_holds,
        lower_bound_holds,
        sign_holds,
        stable_sums_match,
    })
}

/// Runs matched ensembles of `X` and `Y` and audits the exponent gap.
pub fn audit_exponent_gap(field: &PerturbedField, orbits: usize, settings: &RunSettings, seed: u64) -> Result<ExponentAudit> {
    let sys = field.base();
    let x = merge_runs(&run_ensemble(sys, None, orbits, settings, seed)?)?;
    let y = merge_runs(&run_ensemble(sys, Some(field), orbits, settings, seed)?)?;
    audit_from(field, &x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_cat_suspension, PhasePoint};
    use crate::perturbation::PerturbationSpec;

    fn setup(xi: f64, r: f64) -> (CatSuspension, PerturbedField) {
        let sys = make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap();
        let p = PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0);
        let f = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p, r, xi)).unwrap();
        (sys, f)
    }

    #[test]
    fn zero_angle_matches_unperturbed_bitwise() {
        let (sys, f) = setup(0.0, 0.1);
        let s = RunSettings { steps: 20_000, burn_in: 100, keep_records: true };
        let x = run_orbit(&sys, None, [0.1, 0.2, 0.3], &s, 0, 5).unwrap();
        let y = run_orbit(&sys, Some(&f), [0.1, 0.2, 0.3], &s, 0, 5).unwrap();
        assert_eq!(x.spectrum.raw, y.spectrum.raw);
        assert_eq!(x.sigma_phi, y.sigma_phi);
        assert!(y.box_entries > 0);
        assert_eq!(y.forward.mean, 0.0);
    }

    #[test]
    fn scalar_cocycle_tracks_unstable_growth() {
        // Summed log γ telescopes to the growth of the unstable component.
        let (sys, f) = setup(0.3, 0.1);
        let s = RunSettings { steps: 50_000, burn_in: 200, keep_records: true };
        let run = run_orbit(&sys, Some(&f), [0.6, 0.1, 0.9], &s, 0, 1).unwrap();
        let diff = (run.sigma_phi.mean - run.spectrum.raw[0]).abs();
        assert!(diff < 5.0 / s.steps as f64, "{diff}");
        assert!(run.sigma_phi.mean < sys.lambda_u().ln());
        let fwd: Vec<_> = run.records.iter().filter(|r| r.regime == Regime::InsideForward).collect();
        assert_eq!(fwd.len(), run.box_entries);
    }

    #[test]
    fn runs_are_deterministic() {
        let (sys, f) = setup(0.3, 0.1);
        let s = RunSettings { steps: 5_000, burn_in: 10, keep_records: true };
        let a = run_ensemble(&sys, Some(&f), 3, &s, 9).unwrap();
        let b = run_ensemble(&sys, Some(&f), 3, &s, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.records, y.records);
            assert_eq!(x.spectrum.raw, y.spectrum.raw);
        }
    }
}
