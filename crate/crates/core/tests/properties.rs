use geoseek_core::averaging::{averaged_field, averaged_field_from, CorrectorField};
use geoseek_core::es::{dither_vector, validate_frequencies, FrequencyViolation};
use geoseek_core::flow::{integrate, integrate_es, IntegratorConfig, Method, Monitor};
use geoseek_core::lie::{self, algebra_from_coords, check_group_membership, exp_coords, group_distance, project_to_group};
use geoseek_core::*;
use nalgebra::DMatrix;
use num_rational::Rational64;
use proptest::prelude::*;

fn series_exp(x: &DMatrix<f64>) -> DMatrix<f64> {
    let k = x.nrows();
    let mut term = DMatrix::identity(k, k);
    let mut sum = term.clone();
    for n in 1..30 {
        term = &term * x / n as f64;
        sum += &term;
    }
    sum
}

fn coeffs(n: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, n)
}

fn tag() -> impl Strategy<Value = GroupTag> {
    prop_oneof![Just(GroupTag::SO3), Just(GroupTag::SE3)]
}

fn element(tag: GroupTag) -> impl Strategy<Value = GroupElement> {
    coeffs(tag.algebra_dim(), 1.5).prop_map(move |c| exp_coords(&c, tag).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_matches_power_series(t in tag(), c in coeffs(6, 1.2)) {
        let c = &c[..t.algebra_dim()];
        let x = algebra_from_coords(c, t).unwrap();
        prop_assume!(x.norm() <= std::f64::consts::PI);
        let g = exp_coords(c, t).unwrap();
        prop_assert!((g.mat() - series_exp(&x)).abs().max() < 1e-10);
    }

    #[test]
    fn one_parameter_subgroup(t in tag(), c in coeffs(6, 1.0), s in -1.5f64..1.5, u in -1.5f64..1.5) {
        let c = &c[..t.algebra_dim()];
        let scaled = |k: f64| c.iter().map(|v| k * v).collect::<Vec<_>>();
        let lhs = exp_coords(&scaled(s), t).unwrap().compose(&exp_coords(&scaled(u), t).unwrap()).unwrap();
        let rhs = exp_coords(&scaled(s + u), t).unwrap();
        prop_assert!((lhs.mat() - rhs.mat()).abs().max() < 1e-10);
    }

    #[test]
    fn distance_is_left_invariant(a in element(GroupTag::SO3), b in element(GroupTag::SO3), h in element(GroupTag::SO3)) {
        let d1 = group_distance(&a, &b).unwrap();
        let d2 = group_distance(&h.compose(&a).unwrap(), &h.compose(&b).unwrap()).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent(t in tag(), g in coeffs(6, 1.5), noise in coeffs(16, 1e-4)) {
        let g = exp_coords(&g[..t.algebra_dim()], t).unwrap();
        let k = t.mat_dim();
        let mut raw = g.mat().clone();
        for i in 0..3 {
            for j in 0..k {
                raw[(i, j)] += noise[i * 4 + j];
            }
        }
        let p = project_to_group(&raw, t).unwrap();
        prop_assert!(check_group_membership(&p).max() < 1e-12);
        let q = project_to_group(p.mat(), t).unwrap();
        prop_assert!((p.mat() - q.mat()).abs().max() < 1e-14);
    }

    #[test]
    fn exp_stays_on_group(t in tag(), c in coeffs(6, 3.0)) {
        let g = exp_coords(&c[..t.algebra_dim()], t).unwrap();
        prop_assert!(check_group_membership(&g).max() < 1e-12);
    }

    #[test]
    fn validator_is_permutation_invariant(p in prop::collection::vec(1i64..40, 2..6), q in prop::collection::vec(1i64..6, 6), seed in any::<u64>()) {
        let m: Vec<Rational64> = p.iter().zip(&q).map(|(a, b)| Rational64::new(*a, *b)).collect();
        let mut perm: Vec<usize> = (0..m.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<Rational64> = perm.iter().map(|&i| m[i]).collect();
        let a = validate_frequencies(&m).unwrap();
        let b = validate_frequencies(&shuffled).unwrap();
        prop_assert_eq!(a.len(), b.len());
        // map violations back to original indices and compare as sets
        let mut mapped: Vec<FrequencyViolation> = b.iter().map(|v| match *v {
            FrequencyViolation::Equal { i, j } => {
                let (x, y) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                FrequencyViolation::Equal { i: x, j: y }
            }
            FrequencyViolation::Double { i, j } => FrequencyViolation::Double { i: perm[i], j: perm[j] },
            FrequencyViolation::Sum { i, j, k } => {
                let (x, y) = (perm[j].min(perm[k]), perm[j].max(perm[k]));
                FrequencyViolation::Sum { i: perm[i], j: x, k: y }
            }
        }).collect();
        let mut orig = a.clone();
        mapped.sort();
        orig.sort();
        prop_assert_eq!(mapped, orig);
    }

    #[test]
    fn validator_is_scale_invariant(p in prop::collection::vec(1i64..30, 2..5), k in 1i64..7) {
        let m: Vec<Rational64> = p.iter().map(|a| Rational64::from_integer(*a)).collect();
        let scaled: Vec<Rational64> = m.iter().map(|r| r * Rational64::new(k, 3)).collect();
        prop_assert_eq!(validate_frequencies(&m).unwrap(), validate_frequencies(&scaled).unwrap());
    }

    #[test]
    fn dither_is_bounded_by_amplitudes(t in -1e3f64..1e3, a in prop::collection::vec(0.01f64..1.0, 3)) {
        let spec = DitherSpec::from_text(a.clone(), &["2", "4.1", "6.2"], 1.7).unwrap();
        let d = dither_vector(t, &spec);
        prop_assert!(d.iter().zip(&a).all(|(x, a)| x.abs() <= *a));
    }

    #[test]
    fn es_field_scales_with_amplitude_for_constant_cost(t in 0.0f64..20.0, s in 0.1f64..3.0) {
        let r2 = ManifoldDescriptor::euclidean(2);
        let cost = |_: &ChartPoint| 1.5;
        let spec = DitherSpec::from_text(vec![0.1, 0.2], &["1", "3"], 2.0).unwrap();
        let big = spec.with_amplitudes(vec![0.1 * s, 0.2 * s]).unwrap();
        let x = ChartPoint::new(vec![0.3, -0.2]);
        let f1 = EsField::new(&r2, &cost, spec).unwrap().eval(&x, t).unwrap();
        let f2 = EsField::new(&r2, &cost, big).unwrap().eval(&x, t).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            prop_assert!((a * s - b).abs() < 1e-13);
        }
    }

    #[test]
    fn euclidean_geodesics_are_additive(x in coeffs(3, 5.0), v in coeffs(3, 2.0), s in 0.0f64..1.0, u in 0.0f64..1.0) {
        let r3 = ManifoldDescriptor::euclidean(3);
        let p = ChartPoint::new(x);
        let sv: Vec<f64> = v.iter().map(|c| s * c).collect();
        let uv: Vec<f64> = v.iter().map(|c| u * c).collect();
        let suv: Vec<f64> = v.iter().map(|c| (s + u) * c).collect();
        let a = r3.exp(&r3.exp(&p, &sv).unwrap(), &uv).unwrap();
        let b = r3.exp(&p, &suv).unwrap();
        for (x, y) in a.coords.iter().zip(&b.coords) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_geodesics_are_additive(x in 0.6f64..2.5, y in -2.0f64..2.0, v in coeffs(2, 0.3), s in 0.1f64..0.9) {
        let chart = sphere_chart();
        let p = ChartPoint::new(vec![x, y]);
        let sv: Vec<f64> = v.iter().map(|c| s * c).collect();
        // velocity at time s along the geodesic, by a short finite difference
        let mid = chart.exp(&p, &sv).unwrap();
        let e = 1e-6;
        let ahead = chart.exp(&p, &v.iter().map(|c| (s + e) * c).collect::<Vec<_>>()).unwrap();
        let rest: Vec<f64> = (0..2).map(|i| (ahead.coords[i] - mid.coords[i]) / e * (1.0 - s)).collect();
        let two_leg = chart.exp(&mid, &rest).unwrap();
        let one_leg = chart.exp(&p, &v).unwrap();
        for (a, b) in two_leg.coords.iter().zip(&one_leg.coords) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn metric_is_bilinear(x in 0.6f64..2.5, u in coeffs(2, 3.0), v in coeffs(2, 3.0), w in coeffs(2, 3.0), a in -2.0f64..2.0) {
        use geoseek_core::manifold::TangentCoords;
        let chart = sphere_chart();
        let base = ChartPoint::new(vec![x, 0.3]);
        let tc = |c: &[f64]| TangentCoords::new(base.clone(), c.to_vec());
        let combo: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + q).collect();
        let lhs = chart.metric_eval(&tc(&combo), &tc(&w)).unwrap();
        let rhs = a * chart.metric_eval(&tc(&u), &tc(&w)).unwrap() + chart.metric_eval(&tc(&v), &tc(&w)).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        let sym = chart.metric_eval(&tc(&w), &tc(&u)).unwrap() - chart.metric_eval(&tc(&u), &tc(&w)).unwrap();
        prop_assert!(sym.abs() < 1e-12);
    }

    #[test]
    fn averaging_window_is_shift_invariant(x in -3.0f64..3.0, s in 0.0f64..50.0) {
        let s1 = ManifoldDescriptor::circle();
        let cost = |p: &ChartPoint| 1.0 - (p.coords[0] - 0.4).cos() + 0.3 * (2.0 * p.coords[0]).sin().powi(2);
        let spec = DitherSpec::from_text(vec![0.2], &["1"], 3.0).unwrap();
        let es = EsField::new(&s1, &cost, spec).unwrap();
        let p = ChartPoint::new(vec![x]);
        let a = averaged_field(&es, &p, 512).unwrap();
        let b = averaged_field_from(&es, &p, 512, s).unwrap();
        prop_assert!((a[0] - b[0]).abs() < 1e-10);
    }

    #[test]
    fn corrector_vanishes_after_whole_periods(x in -3.0f64..3.0, k in 1u32..30) {
        let spec = DitherSpec::from_text(vec![0.1, 0.05], &["1", "3"], 20.0).unwrap();
        let r2 = ManifoldDescriptor::euclidean(2);
        let cost = |p: &ChartPoint| 1.0 - p.coords[0].cos() + p.coords[1].powi(2);
        let es = EsField::new(&r2, &cost, spec.clone()).unwrap();
        let z = CorrectorField::new(&es, k as f64 * spec.period(), 512).unwrap();
        let v = z.eval(&ChartPoint::new(vec![x, 0.5])).unwrap();
        prop_assert!(v.iter().all(|c| c.abs() < 1e-9));
    }
}

fn sphere_chart() -> ManifoldDescriptor {
    ManifoldDescriptor::from_metric(
        "sphere",
        vec![(0.05, std::f64::consts::PI - 0.05), (-10.0, 10.0)],
        std::f64::consts::PI,
        |x| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, x[0].sin().powi(2)])),
    )
    .unwrap()
}

fn decay_error(h: f64) -> f64 {
    let r1 = ManifoldDescriptor::euclidean(1);
    let field = |x: &ChartPoint, _: f64| Ok(vec![-x.coords[0]]);
    let cost = |_: &ChartPoint| 0.0;
    let x0 = ChartPoint::new(vec![1.0]);
    let cfg = IntegratorConfig::new(h, Method::ChartRk4, 1.0);
    let traj = integrate(&r1, &field, &x0, &cfg, Monitor { cost: &cost, target: &x0 }, "decay").unwrap();
    (traj.last().state.coords[0] - (-1.0f64).exp()).abs()
}

#[test]
fn chart_rk4_error_ratio_on_halving() {
    let ratio = decay_error(0.1) / decay_error(0.05);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn lie_euler_exact_for_constant_se3_field() {
    let se3 = MatrixGroup::new(GroupTag::SE3);
    let xi = [0.2, -0.4, 0.1, 1.0, 0.5, -0.3];
    let g0 = GroupElement::se3(&GroupElement::rz(0.6), [1.0, 2.0, 3.0]).unwrap();
    let field = move |_: &GroupElement, _: f64| Ok(xi.to_vec());
    let cost = |_: &GroupElement| 0.0;
    let cfg = IntegratorConfig::new(0.01, Method::LieEuler, 3.0).with_stride(50);
    let traj = integrate(&se3, &field, &g0, &cfg, Monitor { cost: &cost, target: &g0 }, "const").unwrap();
    for s in &traj.samples {
        let scaled: Vec<f64> = xi.iter().map(|c| c * s.t).collect();
        let want = g0.compose(&exp_coords(&scaled, GroupTag::SE3).unwrap()).unwrap();
        assert!((s.state.mat() - want.mat()).abs().max() < 1e-12);
    }
}

#[test]
fn unprojected_lie_euler_drift_stays_small() {
    let so3 = MatrixGroup::new(GroupTag::SO3);
    let cost = |g: &GroupElement| 3.0 - g.mat().trace();
    let spec = DitherSpec::from_text(vec![0.1; 3], &["2", "4.1", "6.2"], 1.0).unwrap();
    let es = EsField::new(&so3, &cost, spec).unwrap();
    let mut cfg = IntegratorConfig::new(1e-3, Method::LieEuler, 100.0).with_stride(1000);
    cfg.project_each_step = false;
    let id = GroupElement::identity(GroupTag::SO3);
    let traj = integrate_es(&es, &GroupElement::rz(0.785), &cfg, &id).unwrap();
    assert!(traj.max_defect < 1e-6, "{:e}", traj.max_defect);
}

#[test]
fn time_rescaling_is_consistent() {
    // ẋ = f(x, t) up to t equals dx/dτ = f(x, τ/ω)/ω up to τ = ω t
    let r1 = ManifoldDescriptor::euclidean(1);
    let cost = |x: &ChartPoint| x.coords[0] * x.coords[0];
    let omega = 20.0;
    let spec = DitherSpec::from_text(vec![0.1], &["1"], omega).unwrap();
    let es = EsField::new(&r1, &cost, spec).unwrap();
    let x0 = ChartPoint::new(vec![1.0]);
    let zero = |_: &ChartPoint| 0.0;
    let t_end = 5.0;
    let slow = |x: &ChartPoint, t: f64| es.eval(x, t);
    let fast = |x: &ChartPoint, tau: f64| es.eval(x, tau / omega).map(|v| v.into_iter().map(|c| c / omega).collect());
    let a = integrate(&r1, &slow, &x0, &IntegratorConfig::new(1e-4, Method::ChartRk4, t_end), Monitor { cost: &zero, target: &x0 }, "t").unwrap();
    let b = integrate(&r1, &fast, &x0, &IntegratorConfig::new(1e-4 * omega, Method::ChartRk4, t_end * omega), Monitor { cost: &zero, target: &x0 }, "tau").unwrap();
    assert!((a.last().state.coords[0] - b.last().state.coords[0]).abs() < 1e-9);
}

#[test]
fn sampled_defects_are_below_tolerance() {
    let so3 = MatrixGroup::new(GroupTag::SO3);
    let cost = |g: &GroupElement| 3.0 - g.mat().trace();
    let spec = DitherSpec::from_text(vec![0.1; 3], &["2", "4.1", "6.2"], 1.0).unwrap();
    let es = EsField::new(&so3, &cost, spec).unwrap();
    let cfg = IntegratorConfig::new(1e-3, Method::Rkmk4, 10.0).with_stride(100);
    let id = GroupElement::identity(GroupTag::SO3);
    let traj = integrate_es(&es, &GroupElement::rz(0.785), &cfg, &id).unwrap();
    assert!(traj.samples.iter().all(|s| lie::check_group_membership(&s.state).max() < 1e-12));
}
