use marsim::energy::ClientSpec;
use marsim::harness::{self, TraceData};
use marsim::leaf::{self, SolverConfig};
use marsim::metrics::Frame;
use marsim::profile::DeviceProfile;
use marsim::report;
use marsim::scenario::{Algorithm, Scenario, TraceSource};

#[test]
fn mine_is_leaf_without_preferences() {
    let p = DeviceProfile::bundled();
    let sc = Scenario::ten_client();
    let specs = sc.client_specs(&p, 300.0, None).unwrap();
    let zeroed: Vec<ClientSpec> = specs
        .iter()
        .map(|s| ClientSpec {
            lambda1: 0.0,
            lambda2: 0.0,
            ..*s
        })
        .collect();
    let direct = leaf::solve(&p, &zeroed, &sc.solver, 300.0).unwrap();
    let mine = harness::run_allocator(&p, &sc, Algorithm::Mine, 300.0, None).unwrap();
    for (row, cfg) in mine.rows.iter().zip(&direct.configs) {
        assert_eq!((row.f, row.s, row.b), (cfg.f, cfg.s, cfg.b));
    }
}

#[test]
fn fact_like_size_follows_preferences() {
    let p = DeviceProfile::bundled();
    let at = |l1, l2| {
        harness::fact_like_size(&p, &ClientSpec::new(15, l1, l2, 100.0), 1.49, 30.0).unwrap()
    };
    assert_eq!(at(0.3, 0.0), p.s_min());
    assert_eq!(at(1e-6, 1e6), p.s_max());
    let twins = [ClientSpec::new(12, 0.3, 1.8, 5.0); 2];
    let cfgs = harness::fact_like_configs(&p, &twins, 200.0).unwrap();
    assert_eq!(cfgs[0], cfgs[1]);
    assert_eq!(cfgs[0].f, 1.49);
    assert_eq!(cfgs[0].b, 100.0);
}

#[test]
fn single_client_with_abundant_bandwidth_matches_mine() {
    let p = DeviceProfile::bundled();
    let spec = [ClientSpec::new(10, 0.0, 0.0, 100.0)];
    let a = leaf::solve(&p, &spec, &SolverConfig::default(), 1e5).unwrap();
    let b = leaf::solve(
        &p,
        &harness::energy_only(&spec),
        &SolverConfig::default(),
        1e5,
    )
    .unwrap();
    assert_eq!(a.configs, b.configs);
}

#[test]
fn sweeps_are_byte_identical() {
    let p = DeviceProfile::bundled();
    let sc = Scenario::ten_client();
    let a = report::to_csv_string(&harness::run_scenario(&p, &sc).unwrap()).unwrap();
    let b = report::to_csv_string(&harness::run_scenario(&p, &sc).unwrap()).unwrap();
    assert_eq!(a, b);
    let rows = report::read_csv_rows(&a).unwrap();
    assert_eq!(rows.len(), 5 * 4 * 3 * 10);
}

#[test]
fn pgm_scenario_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    // A bright square drifting right one pixel per frame.
    for i in 0..12usize {
        let mut px = vec![20u8; 16 * 16];
        for y in 4..10 {
            for x in (2 + i % 8)..(6 + i % 8) {
                px[y * 16 + x] = 220;
            }
        }
        Frame::new(16, 16, px)
            .unwrap()
            .save_pgm(dir.path().join(format!("f{i:03}.pgm")))
            .unwrap();
    }
    let mut sc = Scenario::motion_blur();
    sc.b_max = vec![300.0];
    sc.offload_sweep = vec![1.0];
    sc.trace = Some(TraceSource::PgmDir {
        path: dir.path().to_path_buf(),
    });
    let data = TraceData::load(sc.trace.as_ref().unwrap()).unwrap();
    assert_eq!(data.psnr.len(), 11);
    let reports = harness::run_aio_scenario(&DeviceProfile::bundled(), &sc).unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        for row in &r.rows {
            assert_eq!(row.frames, Some(11));
            let tracks = (row.frames.unwrap() - row.detects.unwrap()) as f64;
            let want =
                row.detects.unwrap() as f64 * row.e_obj.unwrap() + tracks * row.e_trk.unwrap();
            assert_eq!(row.total_energy, Some(want));
        }
    }
}
