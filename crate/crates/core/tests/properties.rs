use proptest::prelude::*;

use marsim::aio::{OffloadPreference, OrchestratorState, SceneModel};
use marsim::energy::{self, ClientSpec, Configuration};
use marsim::harness::{self, PolicyCosts, TraceData};
use marsim::leaf::{self, SolverConfig};
use marsim::metrics::{self, BoundingBox, Frame};
use marsim::profile::DeviceProfile;
use marsim::report::Aggregate;
use marsim::scenario::{AioSettings, Algorithm};
use marsim::trace;

fn frame_pair(max: u8) -> impl Strategy<Value = (Frame, Frame)> {
    (1usize..6, 1usize..6).prop_flat_map(move |(w, h)| {
        let px = prop::collection::vec(0..=max, w * h);
        (px.clone(), px)
            .prop_map(move |(a, b)| (Frame::new(w, h, a).unwrap(), Frame::new(w, h, b).unwrap()))
    })
}

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mse_and_psnr_are_symmetric((a, b) in frame_pair(255)) {
        prop_assert_eq!(metrics::mse(&a, &b).unwrap(), metrics::mse(&b, &a).unwrap());
        let p = metrics::psnr(&a, &b).unwrap();
        prop_assert_eq!(p, metrics::psnr(&b, &a).unwrap());
        prop_assert!((0.0..=metrics::DEFAULT_PSNR_CAP).contains(&p));
    }

    #[test]
    fn psnr_inverts_mse(mse in 1e-3..65025.0f64) {
        let back = metrics::mse_from_psnr(metrics::psnr_from_mse(mse, f64::INFINITY));
        prop_assert!((back - mse).abs() <= 1e-9 * mse);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let v = metrics::iou(&a, &b);
        prop_assert_eq!(v, metrics::iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((metrics::iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ncc_ignores_gain_and_offset((a, b) in frame_pair(100), gain in 1u8..=2, offset in 0u8..=50) {
        let map = |f: &Frame| {
            Frame::new(f.width(), f.height(), f.pixels().iter().map(|&v| v * gain + offset).collect()).unwrap()
        };
        if let (Ok(x), Ok(y)) = (metrics::ncc(&a, &b), metrics::ncc(&map(&a), &map(&b))) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x));
        }
    }

    #[test]
    fn energy_components_compose(
        fps in 1u32..=30,
        f in 0.3..2.649f64,
        s in 128.0..608.0f64,
        b in 1.0..500.0f64,
    ) {
        let p = DeviceProfile::bundled();
        let e = energy::energy_per_frame(&p, &ClientSpec::new(fps, 0.3, 1.8, 10.0), &Configuration::new(f, s, b)).unwrap();
        prop_assert_eq!(e.total, e.e_img + e.e_cv + e.e_com + e.e_bs);
        prop_assert_eq!(e.latency, e.l_cv + e.l_tr + e.l_inf);
        prop_assert!(e.total > 0.0);
    }

    #[test]
    fn solve_rho_is_the_exhaustive_minimum(
        e_obj in 0.1..5.0f64,
        e_trk in 0.01..3.0f64,
        rho_max in 0u32..=150,
        v_bar in -2.0..2.0f64,
        t1 in 0.1..10.0f64,
        t2 in 0.1..10.0f64,
        psnr in 0.0..60.0f64,
    ) {
        let scene = SceneModel::motion_blur();
        let mut st = OrchestratorState::new(30, 0.1, e_obj, e_trk, rho_max).unwrap();
        st.v_bar = v_bar;
        let pref = OffloadPreference::new(t1, t2).unwrap();
        let rho = st.solve_rho(&scene, &pref, psnr);
        prop_assert!(rho <= rho_max);
        let best = st.objective(&scene, &pref, rho, psnr);
        for r in 0..=rho_max {
            let j = st.objective(&scene, &pref, r, psnr);
            prop_assert!(best <= j);
            if r < rho {
                prop_assert!(best < j, "earlier tie at {}", r);
            }
        }
    }

    #[test]
    fn tracking_budget_grows_with_energy_weight(
        e_obj in 0.5..5.0f64,
        trk_share in 0.01..0.9f64,
        v_bar in -2.0..0.5f64,
        psnr in 10.0..50.0f64,
        lo in 0.1..5.0f64,
        factor in 1.0..10.0f64,
    ) {
        let scene = SceneModel::motion_blur();
        let mut st = OrchestratorState::new(30, 0.1, e_obj, e_obj * trk_share, 120).unwrap();
        st.v_bar = v_bar;
        let r1 = st.solve_rho(&scene, &OffloadPreference::from_ratio(lo).unwrap(), psnr);
        let r2 = st.solve_rho(&scene, &OffloadPreference::from_ratio(lo * factor).unwrap(), psnr);
        prop_assert!(r1 <= r2, "ratio {} -> {}, ratio {} -> {}", lo, r1, lo * factor, r2);
    }

    #[test]
    fn policy_energy_accounting_is_exact(
        seed in any::<u64>(),
        length in 3usize..200,
        drift in -0.2..0.2f64,
        fps in 1u32..=30,
        e_obj in 0.2..3.0f64,
        trk_share in 0.01..0.9f64,
        ratio in 0.1..10.0f64,
    ) {
        let data = TraceData::from_psnr(trace::synth_trace(seed, 30.0, length, drift, 1.0).unwrap());
        let costs = PolicyCosts { fps, e_obj, l_obj: 0.5, e_trk: e_obj * trk_share, l_trk: 0.02 };
        let settings = AioSettings::default();
        let pref = OffloadPreference::from_ratio(ratio).unwrap();
        for policy in Algorithm::OFFLOAD_POLICIES {
            let run = harness::simulate_policy(policy, &data, &costs, &settings, &pref).unwrap();
            prop_assert_eq!(run.frames, length as u64);
            prop_assert!(run.detects >= 1 && run.detects <= run.frames);
            let tracks = (run.frames - run.detects) as f64;
            prop_assert_eq!(run.total_energy, run.detects as f64 * costs.e_obj + tracks * costs.e_trk);
            prop_assert!((0.0..=1.0).contains(&run.mean_iou));
            if policy == Algorithm::LeafOnly {
                prop_assert_eq!(run.detects, run.frames);
            }
        }
    }

    #[test]
    fn synthetic_traces_are_reproducible(seed in any::<u64>(), length in 3usize..100) {
        let a = trace::synth_trace(seed, 30.0, length, -0.05, 0.5).unwrap();
        prop_assert_eq!(&a, &trace::synth_trace(seed, 30.0, length, -0.05, 0.5).unwrap());
        prop_assert!(a.iter().enumerate().all(|(i, v)| (v - (30.0 - 0.05 * i as f64)).abs() <= 0.5));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solved_allocations_are_feasible(
        clients in prop::collection::vec((1u32..=30, 0.0..1.0f64, 0.0..5.0f64), 1..6),
        b_max in 20.0..500.0f64,
    ) {
        let p = DeviceProfile::bundled();
        let l_max = leaf::default_latency_bound(&p, clients.len(), b_max).unwrap();
        let specs: Vec<ClientSpec> = clients.iter().map(|&(fps, l1, l2)| ClientSpec::new(fps, l1, l2, l_max)).collect();
        let alloc = leaf::solve(&p, &specs, &SolverConfig::default(), b_max).unwrap();
        prop_assert!(alloc.configs.iter().map(|c| c.b).sum::<f64>() <= b_max * (1.0 + 1e-9));
        for c in &alloc.configs {
            prop_assert!(c.f >= p.cpu.f_min && c.f <= p.cpu.f_max);
            prop_assert!(p.detector.model_sizes.contains(&c.s));
            let l = energy::latency_per_frame(&p, c).unwrap().total;
            prop_assert!(leaf::latency_within_bound(l, l_max));
        }
        prop_assert!(alloc.trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(alloc.q_value <= alloc.initial_q);
        let q = leaf::total_objective(&p, &specs, &alloc.configs).unwrap();
        prop_assert!((q - alloc.q_value).abs() <= 1e-12 * q.abs().max(1.0));
    }
}

#[test]
fn static_scene_tracks_to_the_budget_cap() {
    let data = TraceData::from_psnr(vec![metrics::DEFAULT_PSNR_CAP; 400]);
    let costs = PolicyCosts {
        fps: 30,
        e_obj: 1.5,
        l_obj: 0.5,
        e_trk: 0.1,
        l_trk: 0.02,
    };
    let settings = AioSettings {
        rho_max: 50,
        ..AioSettings::default()
    };
    let pref = OffloadPreference::from_ratio(1.0).unwrap();
    let run =
        harness::simulate_policy(Algorithm::LeafAio, &data, &costs, &settings, &pref).unwrap();
    // One detection opens every window of rho_max tracked frames.
    assert_eq!(run.detects, 400u64.div_ceil(51));
}

#[test]
fn report_aggregates_match_rows() {
    let p = DeviceProfile::bundled();
    let scenario = marsim::scenario::Scenario::ten_client();
    for report in harness::run_leaf_scenario(&p, &scenario).unwrap() {
        assert_eq!(report.aggregate, Aggregate::from_rows(&report.rows));
        assert_eq!(report.rows.len(), scenario.clients.len());
    }
}
