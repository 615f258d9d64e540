use super::*;

fn tiny(mode: ExpMode) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(mode);
    c.dataset.scale = 0.1;
    c.rounds = 3;
    c.tuner = if mode == ExpMode::Asfgnn { Tuner::Bo } else { Tuner::Fixed };
    c.fixed.hidden = 16;
    c.timing = false;
    c
}

#[test]
fn fixed_run_matches_a_direct_fgnn_run() {
    let c = tiny(ExpMode::Sfgnn);
    let out = run_asfgnn(&c).unwrap();
    assert_eq!(out.report.trial_count, 1);

    let g = load_graph(&c.dataset).unwrap();
    let data = client_datasets(&g, &c, 0).unwrap();
    let direct = run_fgnn(data, &trial_config(&c, &c.fixed_theta(), 0).unwrap()).unwrap();
    let best = direct.best_round().unwrap();
    let run = &out.report.runs[0];
    assert_eq!(run.best_value, best.global_metric);
    assert_eq!(run.test_accuracy, best.mean_test());
    assert_eq!(run.best_round, best.round);
    assert_eq!(run.messages, direct.transport.message_count());
    let rounds: Vec<RoundReport> = out.rounds.iter().map(|r| r.round.clone()).collect();
    assert_eq!(rounds, direct.rounds);
}

#[test]
fn grid_tuner_runs_exactly_the_budget() {
    let mut c = tiny(ExpMode::Sp);
    c.tuner = Tuner::Grid;
    c.budget = 2;
    c.space = SpaceKind::Shared;
    let out = run_baseline(&c).unwrap();
    assert_eq!(out.trials.len(), 2);
    assert_eq!(out.trials[1].trial.trial_index, 1);
    assert_eq!(out.trials[0].trial.theta["hidden"], 64.0);
    assert_eq!(out.trials[1].trial.theta["hidden"], 128.0);
}

#[test]
fn reported_value_is_the_max_round_metric() {
    let mut c = tiny(ExpMode::Asfgnn);
    c.budget = 3;
    c.n0 = 2;
    c.seeds = vec![0, 1];
    let out = run_asfgnn(&c).unwrap();
    assert_eq!(out.trials.len(), 6);
    for run in &out.report.runs {
        let max = out
            .rounds
            .iter()
            .filter(|r| r.seed == run.seed)
            .map(|r| r.round.global_metric)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best_value, max);
        let best = out
            .trials
            .iter()
            .filter(|t| t.seed == run.seed)
            .map(|t| t.trial.value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best_value, best);
    }
}

#[test]
fn single_client_baselines_coincide() {
    let mut sp = tiny(ExpMode::Sp);
    sp.num_clients = 1;
    let mut fl = tiny(ExpMode::Fl);
    fl.num_clients = 1;
    let cm = tiny(ExpMode::Cm);
    let a = run_baseline(&sp).unwrap().report.runs[0].clone();
    let b = run_baseline(&fl).unwrap().report.runs[0].clone();
    let m = run_baseline(&cm).unwrap().report.runs[0].clone();
    for r in [&a, &b] {
        assert_eq!(r.best_value, m.best_value);
        assert_eq!(r.per_client_test, m.per_client_test);
        assert_eq!(r.messages, 0);
    }
}

#[test]
fn mode_isolation_in_reports() {
    let sp = run_baseline(&tiny(ExpMode::Sp)).unwrap();
    assert_eq!(sp.report.runs[0].messages, 0);
    let cm = run_baseline(&tiny(ExpMode::Cm)).unwrap();
    assert_eq!(cm.report.runs[0].shares, 0);
    assert_eq!(cm.report.num_clients, 1);
    let sf = run_asfgnn(&tiny(ExpMode::Sfgnn)).unwrap();
    assert!(sf.report.runs[0].messages > 0);
}

#[test]
fn emitted_files_round_trip_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(ExpMode::Asfgnn);
    c.budget = 3;
    c.n0 = 2;
    let mut bytes = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(format!("run{k}"));
        c.out = Some(d.clone());
        let RunResult::Single(rep) = run(&c).unwrap() else { panic!("expected a single report") };
        assert_eq!(read_report(d.join(REPORT_FILE)).unwrap(), rep);
        let csv = fs::read_to_string(d.join(SUMMARY_FILE)).unwrap();
        assert_eq!(csv.lines().count() - 1, rep.trial_count);
        assert_eq!(fs::read_to_string(d.join(ROUNDS_FILE)).unwrap().lines().count(), c.rounds);
        bytes.push(
            [REPORT_FILE, TRIALS_FILE, ROUNDS_FILE, SUMMARY_FILE]
                .map(|f| fs::read(d.join(f)).unwrap()),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn resumed_bo_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(ExpMode::Asfgnn);
    c.n0 = 2;
    c.budget = 4;
    let full = run_experiment(&c).unwrap();

    c.out = Some(dir.path().to_path_buf());
    c.budget = 2;
    run_experiment(&c).unwrap();
    c.budget = 4;
    c.resume = true;
    let resumed = run_experiment(&c).unwrap();
    assert_eq!(resumed.trials, full.trials);
    assert_eq!(resumed.report.runs[0].best_value, full.report.runs[0].best_value);
    assert_eq!(resumed.report.runs[0].test_accuracy, full.report.runs[0].test_accuracy);
}

#[test]
fn alpha_sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(ExpMode::Sfgnn);
    c.rounds = 1;
    c.out = Some(dir.path().to_path_buf());
    let values = [0.6, 0.7, 0.8, 0.9, 1.0];
    let t = sweep(&c, SweepVar::Alpha, &values).unwrap();
    assert_eq!(t.rows.len(), 5);
    assert_eq!(t.rows.iter().map(|r| r.value).collect::<Vec<_>>(), values);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(dir.path().join("alpha-0.6").join(REPORT_FILE).exists());
}

#[test]
fn client_sweep_switches_to_label_groups() {
    let c = tiny(ExpMode::Sfgnn);
    let p = sweep_point(&c, SweepVar::NumClients, 4.0).unwrap();
    assert_eq!((p.num_clients, p.split), (4, SplitKind::LabelGroups));
    assert!(sweep_point(&c, SweepVar::NumClients, 2.5).is_err());
    assert!(!sweep_point(&c, SweepVar::JsOnOff, 0.0).unwrap().js);
}

#[test]
fn label_ratio_split_uses_cora_parts() {
    let c = tiny(ExpMode::Sfgnn);
    let g = load_graph(&c.dataset).unwrap();
    let d = client_datasets(&g, &c, 0).unwrap();
    assert_eq!(d.len(), 2);
    assert!(d[0].graph.labels.iter().all(|l| CitationConfig::CORA_PART1.contains(l)));
    assert!(d[1].graph.labels.iter().all(|l| CitationConfig::CORA_PART2.contains(l)));
    let mut c = c;
    c.split = SplitKind::Degree;
    let d = client_datasets(&g, &c, 0).unwrap();
    let t = median_degree(&g);
    assert_eq!(d[0].graph.num_nodes, (0..g.num_nodes).filter(|&v| g.degree(v) <= t).count());
}

#[test]
fn wrong_runner_is_a_config_error() {
    assert!(matches!(run_baseline(&tiny(ExpMode::Sfgnn)), Err(Error::Config(_))));
    assert!(matches!(run_asfgnn(&tiny(ExpMode::Cm)), Err(Error::Config(_))));
    let mut c = tiny(ExpMode::Sp);
    c.dataset.path = Some(PathBuf::from("/nonexistent/dataset"));
    assert_eq!(run_experiment(&c).unwrap_err().exit_code(), 2);
}
