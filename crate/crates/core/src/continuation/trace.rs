//! Pseudo-arclength continuation of one-dimensional zero sets.

use nalgebra::{DMatrix, DVector};

use super::newton::{correct_on_plane, refine};
use super::{Branch, Event, EventKind, TraceSettings};
use crate::error::{PegError, Result};
use crate::polygon::chart_diff;
use crate::residuals::{Augmented, ExtraRow, Perturbed, ResidualSystem, ScalarFn};

/// Ratio `sigma_r / sigma_1` below which a Jacobian is treated as rank-deficient.
const RANK_TOL: f64 = 1e-9;

/// Size of the perturbation used to restore transversality.
const PERTURBATION: f64 = 1e-7;

const CORRECTOR_ITERATIONS: usize = 12;
const EVENT_ITERATIONS: usize = 30;
const EVENT_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-12;

/// Smallest cosine between consecutive tangents accepted without halving.
const MIN_TANGENT_COSINE: f64 = 0.95;

/// Named scalar function whose sign changes along a branch are located.
pub struct EventFn<'a> {
    pub kind: EventKind,
    pub func: ScalarFn<'a>,
}

impl<'a> EventFn<'a> {
    pub fn new(kind: EventKind, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        EventFn {
            kind,
            func: Box::new(func),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit kernel vector of `j` (whose rank is `n - 1`), together with the
/// ratio `sigma_{n-1} / sigma_1` measuring how well-defined it is.
fn kernel(j: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let (m, n) = j.shape();
    let mut a = DMatrix::zeros(m.max(n), n);
    a.rows_mut(0, m).copy_from(j);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    let smallest = *order.last().expect("nonempty");
    let ratio = if n >= 2 && s[order[0]] > 0.0 {
        s[order[n - 2]] / s[order[0]]
    } else {
        0.0
    };
    (vt.row(smallest).transpose().normalize(), ratio)
}

/// Tangent continuing `prev`: the kernel vector of `j` with `tau . prev > 0`.
fn tangent(j: &DMatrix<f64>, prev: &DVector<f64>) -> (DVector<f64>, f64) {
    let (t, ratio) = kernel(j);
    if t.dot(prev) < 0.0 {
        (-t, ratio)
    } else {
        (t, ratio)
    }
}

/// Initial orientation: `det [J; tau] > 0` for square-augmentable systems,
/// otherwise the largest component of `tau` is positive.
fn initial_tangent(j: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let (t, ratio) = kernel(j);
    let (m, n) = j.shape();
    let sign = if m + 1 == n {
        let mut a = DMatrix::zeros(n, n);
        a.rows_mut(0, m).copy_from(j);
        a.row_mut(m).copy_from(&t.transpose());
        a.determinant().signum()
    } else {
        let k = t.iamax();
        t[k].signum()
    };
    (if sign < 0.0 { -t } else { t }, ratio)
}

enum Ending {
    Closed,
    Boundary,
}

struct March {
    samples: Vec<Vec<f64>>,
    ending: Ending,
    arclength: f64,
    degenerate: bool,
}

/// Walk from `u0` along `tau0` until the loop closes or the boundary floor is
/// reached.
fn march(
    sys: &dyn ResidualSystem,
    u0: &[f64],
    tau0: &DVector<f64>,
    s: &TraceSettings,
    allow_closure: bool,
) -> Result<March> {
    let periodic = sys.periodic();
    let mut samples = vec![u0.to_vec()];
    let mut u = u0.to_vec();
    let mut tau = tau0.clone();
    let mut h = s.step_init;
    let mut clean = 0;
    let mut arclength = 0.0;
    let mut prev_side: Option<f64> = None;
    let mut degenerate = false;
    let near = 3.0 * s.step_max;

    for step in 0..s.max_steps {
        let pred: Vec<f64> = u.iter().zip(tau.iter()).map(|(a, t)| a + h * t).collect();
        let corrected = correct_on_plane(
            sys,
            &pred,
            &tau,
            &pred,
            s.corrector_tol,
            CORRECTOR_ITERATIONS,
        );
        let accepted = corrected.and_then(|v| {
            let jump = norm(&v.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
            if jump > 2.0 * h {
                return None;
            }
            let (t, ratio) = tangent(&sys.jacobian(&v), &tau);
            if t.dot(&tau) < MIN_TANGENT_COSINE && h > MIN_STEP * 1e3 {
                return None;
            }
            Some((v, t, ratio, jump))
        });
        // never step across the boundary of the domain
        let accepted =
            accepted.filter(|(v, ..)| sys.boundary_distance(v) >= 0.0 || h <= MIN_STEP * 1e3);
        let Some((v, t, ratio, jump)) = accepted else {
            h *= 0.5;
            clean = 0;
            if h < MIN_STEP {
                return Err(PegError::Divergence { step });
            }
            continue;
        };
        if ratio < RANK_TOL {
            degenerate = true;
        }
        arclength += jump;
        u = v;
        tau = t;
        samples.push(u.clone());

        if allow_closure {
            let d = chart_diff(&u, u0, &periodic);
            let dist = norm(&d);
            if dist < near && arclength > near {
                let side = dot(&d, tau0.as_slice());
                if prev_side.is_some_and(|p| p < 0.0) && side >= 0.0 {
                    let lift: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - b).collect();
                    let back = correct_on_plane(
                        sys,
                        &u,
                        tau0,
                        &lift,
                        s.corrector_tol,
                        CORRECTOR_ITERATIONS,
                    );
                    if let Some(b) = back {
                        let off =
                            norm(&b.iter().zip(&lift).map(|(x, y)| x - y).collect::<Vec<_>>());
                        if off < s.closure_tol {
                            samples.pop();
                            if let Some(last) = samples.last() {
                                arclength -= jump;
                                arclength += norm(
                                    &lift
                                        .iter()
                                        .zip(last)
                                        .map(|(x, y)| x - y)
                                        .collect::<Vec<_>>(),
                                );
                            }
                            samples.push(lift);
                            return Ok(March {
                                samples,
                                ending: Ending::Closed,
                                arclength,
                                degenerate,
                            });
                        }
                    }
                }
                prev_side = Some(side);
            } else {
                prev_side = None;
            }
        }

        if sys.boundary_distance(&u) < s.boundary_floor {
            return Ok(March {
                samples,
                ending: Ending::Boundary,
                arclength,
                degenerate,
            });
        }
        clean += 1;
        if clean >= 5 {
            h = (h * 1.3).min(s.step_max);
            clean = 0;
        }
    }
    Err(PegError::MaxSteps(s.max_steps))
}

/// Locate a zero of `f` between two consecutive samples by bisection of the
/// secant, correcting each trial point back onto the branch.
fn locate(
    sys: &dyn ResidualSystem,
    f: &dyn Fn(&[f64]) -> f64,
    a: &[f64],
    b: &[f64],
    fa: f64,
    s: &TraceSettings,
) -> Option<(Vec<f64>, f64)> {
    let chord: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let len = norm(&chord);
    if len == 0.0 {
        return Some((a.to_vec(), fa));
    }
    let normal = DVector::from_iterator(chord.len(), chord.iter().map(|c| c / len));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (a.to_vec(), fa);
    let at = |t: f64| -> Option<Vec<f64>> {
        let p: Vec<f64> = a.iter().zip(&chord).map(|(x, c)| x + t * c).collect();
        correct_on_plane(sys, &p, &normal, &p, s.corrector_tol, EVENT_ITERATIONS)
    };
    while (hi - lo) * len > EVENT_TOL {
        let mid = 0.5 * (lo + hi);
        let v = at(mid)?;
        let fv = f(&v);
        best = (v, fv);
        if fv == 0.0 {
            break;
        }
        if fv.signum() == fa.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(best)
}

fn locate_events(
    sys: &dyn ResidualSystem,
    samples: &[Vec<f64>],
    events: &[EventFn<'_>],
    s: &TraceSettings,
) -> Vec<Event> {
    let mut out = Vec::new();
    for ev in events {
        let values: Vec<f64> = samples.iter().map(|u| (ev.func)(u)).collect();
        for i in 0..samples.len().saturating_sub(1) {
            let (fa, fb) = (values[i], values[i + 1]);
            let change =
                (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) || (fb == 0.0 && fa != 0.0);
            if !change {
                continue;
            }
            if let Some((loc, value)) =
                locate(sys, ev.func.as_ref(), &samples[i], &samples[i + 1], fa, s)
            {
                out.push(Event {
                    kind: ev.kind,
                    location: loc,
                    bracket: [i, i + 1],
                    value,
                });
            }
        }
    }
    out.sort_by_key(|a| a.bracket);
    out
}

fn winding_of(sys: &dyn ResidualSystem, samples: &[Vec<f64>]) -> Option<i64> {
    let first = sys.winding_coordinate(samples.first()?)?;
    let last = sys.winding_coordinate(samples.last()?)?;
    Some((last - first).round() as i64)
}

/// Does the kernel direction `e_0` (base rotation) annihilate the residual?
fn rotation_invariant(sys: &dyn ResidualSystem, j: &DMatrix<f64>) -> bool {
    if !sys.periodic().contains(&0) {
        return false;
    }
    let col = j.column(0).norm();
    col <= RANK_TOL * j.norm().max(1e-300)
}

struct Traced {
    samples: Vec<Vec<f64>>,
    closed: bool,
    arclength: f64,
    degenerate: bool,
}

fn trace_raw(sys: &dyn ResidualSystem, u0: &[f64], s: &TraceSettings) -> Result<Traced> {
    let (tau0, _) = initial_tangent(&sys.jacobian(u0));
    let fwd = march(sys, u0, &tau0, s, true)?;
    match fwd.ending {
        Ending::Closed => Ok(Traced {
            samples: fwd.samples,
            closed: true,
            arclength: fwd.arclength,
            degenerate: fwd.degenerate,
        }),
        Ending::Boundary => {
            let back = march(sys, u0, &(-&tau0), s, false)?;
            let mut samples: Vec<Vec<f64>> = back.samples.into_iter().rev().collect();
            samples.extend(fwd.samples.into_iter().skip(1));
            Ok(Traced {
                samples,
                closed: false,
                arclength: fwd.arclength + back.arclength,
                degenerate: fwd.degenerate || back.degenerate,
            })
        }
    }
}

/// Trace the component of the zero set through `u0`.
///
/// If the Jacobian is rank-deficient and the system is invariant under base
/// rotation, the phase `u_0` is pinned; otherwise rank deficiency anywhere
/// along the branch triggers a retrace of a slightly perturbed system.
pub fn trace_branch(
    sys: &dyn ResidualSystem,
    u0: &[f64],
    s: &TraceSettings,
    events: &[EventFn<'_>],
) -> Result<Branch> {
    s.validate()?;
    let n = sys.domain_dim();
    if sys.codomain_dim() + 1 != n || u0.len() != n {
        return Err(PegError::InvalidInput(format!(
            "tracing needs n - 1 equations in n unknowns, got {} in {}",
            sys.codomain_dim(),
            n
        )));
    }
    let start = refine(sys, u0, s)?;
    let j = sys.jacobian(&start);
    let (_, ratio) = kernel(&j);

    if ratio < RANK_TOL && rotation_invariant(sys, &j) {
        let phase = start[0];
        let pinned = Augmented::new(
            sys,
            vec![ExtraRow::new("phase", move |u: &[f64]| u[0] - phase)],
        );
        let t = trace_raw(&pinned, &start, s)?;
        return Ok(finish(sys, &pinned, t, s, events, true, false));
    }

    let t = trace_raw(sys, &start, s)?;
    if ratio >= RANK_TOL && !t.degenerate {
        return Ok(finish(sys, sys, t, s, events, false, false));
    }

    let perturbed = Perturbed::new(sys, PERTURBATION, s.seed);
    let start = refine(&perturbed, &start, s)?;
    let t = trace_raw(&perturbed, &start, s)?;
    Ok(finish(sys, &perturbed, t, s, events, false, true))
}

fn finish(
    base: &dyn ResidualSystem,
    traced: &dyn ResidualSystem,
    t: Traced,
    s: &TraceSettings,
    events: &[EventFn<'_>],
    pinned: bool,
    perturbed: bool,
) -> Branch {
    let mut found = locate_events(traced, &t.samples, events, s);
    if !t.closed {
        let last = t.samples.len() - 1;
        for (idx, br) in [
            (0, [0, 1.min(last)]),
            (last, [last.saturating_sub(1), last]),
        ] {
            found.push(Event {
                kind: EventKind::BoundaryApproach,
                location: t.samples[idx].clone(),
                bracket: br,
                value: base.boundary_distance(&t.samples[idx]),
            });
        }
    }
    let winding = if t.closed {
        winding_of(base, &t.samples)
    } else {
        None
    };
    let mut branch = Branch {
        system: base.kind(),
        samples: t.samples,
        closed: t.closed,
        winding,
        isotropy_order: 1,
        events: found,
        arclength: t.arclength,
        pinned,
        perturbed,
    };
    if branch.closed && base.symmetry_order() > 1 {
        branch.isotropy_order = isotropy(&branch, traced, base, s);
    }
    branch
}

/// Winding number of a closed branch.
pub fn winding_number(branch: &Branch) -> Result<i64> {
    if !branch.closed {
        return Err(PegError::OpenBranch);
    }
    branch
        .winding
        .ok_or_else(|| PegError::InvalidInput("system has no winding coordinate".into()))
}

/// Is the zero `p` on the traced branch? Projects the nearest sample onto the
/// hyperplane through `p` and compares.
pub fn on_branch(sys: &dyn ResidualSystem, branch: &Branch, p: &[f64], s: &TraceSettings) -> bool {
    let periodic = sys.periodic();
    let (mut best, mut best_d) = (0, f64::INFINITY);
    for (i, u) in branch.samples.iter().enumerate() {
        let d = norm(&chart_diff(p, u, &periodic));
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    if best_d > 3.0 * s.step_max {
        return false;
    }
    let sample = &branch.samples[best];
    let lift: Vec<f64> = sample
        .iter()
        .zip(chart_diff(p, sample, &periodic))
        .map(|(a, d)| a + d)
        .collect();
    if best_d < s.closure_tol {
        return true;
    }
    let prev = &branch.samples[best.saturating_sub(1)];
    let next = &branch.samples[(best + 1).min(branch.samples.len() - 1)];
    let dir: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
    let len = norm(&dir);
    if len == 0.0 {
        return false;
    }
    let normal = DVector::from_iterator(dir.len(), dir.iter().map(|x| x / len));
    match correct_on_plane(
        sys,
        sample,
        &normal,
        &lift,
        s.corrector_tol,
        EVENT_ITERATIONS,
    ) {
        Some(v) => {
            norm(&v.iter().zip(&lift).map(|(a, b)| a - b).collect::<Vec<_>>()) < s.closure_tol
        }
        None => false,
    }
}

/// Largest `k | n` such that `shift^(n/k)` maps the closed branch to itself,
/// where `n` is the symmetry order of `base`. `traced` is the system whose
/// zero set the samples lie on (pinned or perturbed variants of `base`).
pub fn isotropy(
    branch: &Branch,
    traced: &dyn ResidualSystem,
    base: &dyn ResidualSystem,
    s: &TraceSettings,
) -> usize {
    let n = base.symmetry_order();
    let u0 = &branch.samples[0];
    for k in (2..=n).rev().filter(|k| n.is_multiple_of(*k)) {
        let g = (0..n / k).fold(u0.clone(), |v, _| base.act(&v));
        if on_branch(traced, branch, &g, s) {
            return k;
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ClosedCurve;
    use crate::residuals::{EdgeRatioSystem, QuadSystem, SystemKind};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn circle_regular_family_closes_with_unit_winding() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let s = TraceSettings::default();
        for n in 3..=5 {
            let sys = EdgeRatioSystem::regular(&c, n).unwrap();
            let mut u = vec![0.1];
            u.extend(vec![1.0 / n as f64; n - 1]);
            let b = trace_branch(&sys, &u, &s, &[]).unwrap();
            assert!(b.closed);
            assert_eq!(winding_number(&b).unwrap().abs(), 1);
            assert_eq!(b.isotropy_order, n);
            for u in &b.samples {
                assert!(sys.residual(u).norm() <= 1e-10);
            }
            let first = &b.samples[0];
            let last = b.samples.last().unwrap();
            assert_abs_diff_eq!((last[0] - first[0]).abs(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn circle_rectangles_sweep_to_both_boundaries() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = QuadSystem::rectangle(&c);
        let s = TraceSettings::default();
        let b = trace_branch(&sys, &[0.0, 0.25, 0.25, 0.25], &s, &[]).unwrap();
        assert!(b.pinned && !b.closed);
        let ends: Vec<_> = b.events_of(EventKind::BoundaryApproach).collect();
        assert_eq!(ends.len(), 2);
        let gaps: Vec<f64> = b.samples.iter().map(|u| u[1]).collect();
        let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().cloned().fold(0.0, f64::max);
        assert!(lo < 2e-4 && hi > 0.5 - 2e-4, "{lo} {hi}");
        for u in &b.samples {
            assert_abs_diff_eq!(u[0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(u[1], u[3], epsilon = 1e-9);
            assert_abs_diff_eq!(u[1] + u[2], 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn event_bisection_hits_aspect_ratio() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = QuadSystem::rectangle(&c);
        let s = TraceSettings::default();
        let aspect = |u: &[f64]| {
            let v =
                crate::residuals::edge_diag_map(&c, &crate::polygon::PolygonParam::from_chart(u));
            (v[0] + v[2]) / (v[1] + v[3]) - 2.0
        };
        let ev = [EventFn::new(EventKind::AspectRatioHit, aspect)];
        let b = trace_branch(&sys, &[0.0, 0.25, 0.25, 0.25], &s, &ev).unwrap();
        let hits: Vec<_> = b.events_of(EventKind::AspectRatioHit).collect();
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0].location[1], 2f64.atan() / PI, epsilon = 1e-9);
    }

    #[test]
    fn open_branch_has_no_winding() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = QuadSystem::rectangle(&c);
        let b = trace_branch(
            &sys,
            &[0.0, 0.25, 0.25, 0.25],
            &TraceSettings::default(),
            &[],
        )
        .unwrap();
        assert!(matches!(winding_number(&b), Err(PegError::OpenBranch)));
    }

    #[test]
    fn trace_is_deterministic() {
        let e = ClosedCurve::ellipse(2.0, 1.0).unwrap();
        let sys = EdgeRatioSystem::regular(&e, 3).unwrap();
        let s = TraceSettings::default();
        let u = refine(&sys, &[0.0, 0.33, 0.33], &s).unwrap();
        let a = trace_branch(&sys, &u, &s, &[]).unwrap();
        let b = trace_branch(&sys, &u, &s, &[]).unwrap();
        assert_eq!(a, b);
    }

    /// Zero sets in the cylinder `S^1 x R`: a small circle away from the
    /// seam, or the graph `y = 0.1 sin(4 pi x)` wrapping once around.
    struct Cylinder {
        wrapping: bool,
    }

    impl ResidualSystem for Cylinder {
        fn kind(&self) -> SystemKind {
            SystemKind::Triangle
        }
        fn domain_dim(&self) -> usize {
            2
        }
        fn codomain_dim(&self) -> usize {
            1
        }
        fn symmetry_order(&self) -> usize {
            2
        }
        fn residual(&self, u: &[f64]) -> DVector<f64> {
            let r = if self.wrapping {
                u[1] - 0.1 * (4.0 * PI * u[0]).sin()
            } else {
                let x = crate::curve::wrap_centered(u[0] - 0.3);
                x * x + u[1] * u[1] - 0.01
            };
            DVector::from_element(1, r)
        }
        fn periodic(&self) -> Vec<usize> {
            vec![0]
        }
        fn act(&self, u: &[f64]) -> Vec<f64> {
            vec![u[0] + 0.5, u[1]]
        }
        fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
            Some(u[0])
        }
    }

    #[test]
    fn contractible_loop_has_zero_winding_and_trivial_isotropy() {
        let sys = Cylinder { wrapping: false };
        let b = trace_branch(&sys, &[0.4, 0.0], &TraceSettings::default(), &[]).unwrap();
        assert!(b.closed);
        assert_eq!(winding_number(&b).unwrap(), 0);
        assert_eq!(b.isotropy_order, 1);
    }

    #[test]
    fn invariant_wrapping_loop_has_full_isotropy() {
        let sys = Cylinder { wrapping: true };
        let b = trace_branch(
            &sys,
            &[0.1, 0.1 * (0.4 * PI).sin()],
            &TraceSettings::default(),
            &[],
        )
        .unwrap();
        assert!(b.closed);
        assert_eq!(winding_number(&b).unwrap().abs(), 1);
        assert_eq!(b.isotropy_order, 2);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn every_sample_satisfies_the_corrector_tolerance(seed in 0u64..1000, n in 3usize..6) {
            let c = crate::corpus::fourier_random(4, 0.3, seed).unwrap();
            let sys = EdgeRatioSystem::regular(&c, n).unwrap();
            let s = TraceSettings::with_seed(seed);
            let perturbed = Perturbed::new(&sys, PERTURBATION, s.seed);
            for b in crate::continuation::find_all_branches(&sys, &s, &[]).unwrap() {
                let traced: &dyn ResidualSystem = if b.perturbed { &perturbed } else { &sys };
                for u in &b.samples {
                    let r = traced.residual(u).norm();
                    prop_assert!(r <= s.corrector_tol, "residual {r:e}");
                }
            }
        }
    }
}
