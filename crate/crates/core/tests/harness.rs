use hda_core::harness::{
    read_phase_csv, run_fig2, run_fig3, run_phase, run_phase_cells, write_fig2, write_fig3, write_phase, Fig2Config,
    Fig3Config, PhaseConfig, THREADS_ENV,
};
use hda_core::io::{parse_spike_csv, read_solution, TRACE_HEADER};
use hda_core::problem::ProblemInstance;
use hda_core::SolverKind;

fn small_fig2() -> Fig2Config {
    Fig2Config {
        m: 16,
        n: 32,
        nz: 3,
        iters: 2_000,
        ..Fig2Config::default()
    }
}

#[test]
fn fig3_without_noise_reproduces_fig2() {
    let f2 = Fig2Config {
        iters: 3_000,
        sample_every: 10,
        ..small_fig2()
    };
    let f3 = Fig3Config {
        m: f2.m,
        n: f2.n,
        nz: f2.nz,
        noise_level: 0.0,
        iters: f2.iters,
        sample_every: f2.sample_every,
        ..Fig3Config::default()
    };
    let a = run_fig2(&f2).unwrap();
    let b = run_fig3(&f3).unwrap();
    assert_eq!(a.run.u, b.run.u);
    assert_eq!(a.run.trace, b.run.trace);
}

#[test]
fn fig3_default_recovers_under_noise() {
    let res = run_fig3(&Fig3Config::default()).unwrap();
    assert!(res.rel_mse <= 0.05, "rel_mse {}", res.rel_mse);
}

#[test]
fn fig2_records_a_firing_and_a_silent_node() {
    let res = run_fig2(&small_fig2()).unwrap();
    assert!(res.spike_counts[res.firing_node] > 0);
    assert_eq!(res.spike_counts[res.silent_node], 0);
    assert!(res.potentials.iter().all(|p| p.2.abs() < 10.0));
    assert!(res.rel_error < 0.1, "{}", res.rel_error);
}

#[test]
fn fig2_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Fig2Config {
        solver: SolverKind::Hopping,
        ..small_fig2()
    };
    let res = run_fig2(&cfg).unwrap();
    write_fig2(&res, &cfg, dir.path()).unwrap();
    for name in [
        "instance.json",
        "trace.csv",
        "overlay.csv",
        "solution.json",
        "spikes.csv",
        "energy.csv",
        "potentials.csv",
        "metadata.json",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some(TRACE_HEADER));
    assert_eq!(trace.lines().count(), res.run.trace.len() + 1);
    let sol = read_solution(&dir.path().join("solution.json")).unwrap();
    assert_eq!(sol.u_vector(), res.run.u);
    let spikes_path = dir.path().join("spikes.csv");
    let spikes = parse_spike_csv(&std::fs::read_to_string(&spikes_path).unwrap(), &spikes_path).unwrap();
    assert_eq!(spikes, res.run.spikes);
    let inst = ProblemInstance::read_json(&dir.path().join("instance.json")).unwrap();
    assert_eq!(inst.truth.values, res.instance.truth.values);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["experiment"], "fig2");
}

#[test]
fn fig3_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Fig3Config {
        m: 16,
        n: 32,
        nz: 3,
        iters: 1_000,
        ..Fig3Config::default()
    };
    let res = run_fig3(&cfg).unwrap();
    write_fig3(&res, &cfg, dir.path()).unwrap();
    for name in ["instance.json", "trace.csv", "overlay.csv", "solution.json", "metadata.json"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
}

fn small_phase() -> PhaseConfig {
    PhaseConfig {
        n: 20,
        alphas: vec![0.3, 0.8],
        betas: vec![0.1, 0.5],
        realizations: 3,
        iters: 2_000,
        ..PhaseConfig::default()
    }
}

#[test]
fn phase_results_do_not_depend_on_worker_count() {
    let cfg = small_phase();
    let cells = [(0.8, 0.1), (0.3, 0.5)];
    // the only test in this binary that touches the variable
    std::env::set_var(THREADS_ENV, "1");
    let one = run_phase_cells(&cfg, &cells).unwrap();
    std::env::set_var(THREADS_ENV, "3");
    let three = run_phase_cells(&cfg, &cells).unwrap();
    std::env::remove_var(THREADS_ENV);
    assert_eq!(one, three);
}

#[test]
fn phase_writes_a_readable_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_phase();
    let grid = run_phase(&cfg).unwrap();
    assert_eq!(grid.cells.len(), 4);
    write_phase(&grid, &cfg, dir.path()).unwrap();
    let path = dir.path().join("phase.csv");
    let cells = read_phase_csv(&std::fs::read_to_string(&path).unwrap(), &path).unwrap();
    assert_eq!(cells, grid.cells);
    assert!(dir.path().join("metadata.json").is_file());
    let easy = grid.cell(0.8, 0.1).unwrap();
    assert!(easy.mse_lbi < 1e-3 && easy.mse_hda < 1e-2, "{easy:?}");
}
