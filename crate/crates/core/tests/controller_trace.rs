use rmlayer_core::controller::{Controller, ControllerConfig};
use rmlayer_core::event_bus::{demo_trace, parse_trace, replay, ReplayMode};
use rmlayer_core::timing::measure_with_seed;
use rmlayer_core::{ActionKind, Configuration, Domain, FftSize, Mechanism, Profile};

fn run(text: &str, config: ControllerConfig) -> Vec<rmlayer_core::Step> {
    let trace = parse_trace(text).unwrap();
    let mut c = Controller::new(&Profile::embedded(), config);
    replay(&trace, ReplayMode::FastForward).map(|e| c.process_event(&e).unwrap()).collect()
}

#[test]
fn demo_trace_walks_the_rule_table() {
    let mut c = Controller::new(&Profile::embedded(), ControllerConfig::default());
    let steps: Vec<_> = replay(&demo_trace(), ReplayMode::FastForward).map(|e| c.process_event(&e).unwrap()).collect();
    let configs: Vec<Configuration> = steps.iter().map(|s| s.state.config).collect();
    assert_eq!(
        configs,
        vec![
            Configuration::new(Domain::Apu, FftSize::P8),
            Configuration::new(Domain::Apu, FftSize::P1024),
            Configuration::new(Domain::Pl, FftSize::P2048),
            Configuration::new(Domain::Pl, FftSize::P4096),
        ]
    );
    let migrations: Vec<usize> =
        steps.iter().enumerate().filter(|(_, s)| s.action.kind.is_migration()).map(|(i, _)| i).collect();
    assert_eq!(migrations, vec![2]);
    let gated: Vec<bool> = steps.iter().map(|s| s.state.pl_clock_gated).collect();
    assert_eq!(gated, vec![true, true, false, false]);
    assert!(steps.iter().all(|s| s.action.overhead_us == 0));
}

#[test]
fn partial_bitstream_charges_only_pl_activation() {
    let steps = run("0 0\n100 2\n100 3\n100 0\n100 2", ControllerConfig { mechanism: Mechanism::PartialBitstream, ..Default::default() });
    let overheads: Vec<u64> = steps.iter().map(|s| s.action.overhead_us).collect();
    assert_eq!(overheads, vec![0, 10_000, 0, 0, 10_000]);
    // the second event lands during the first load and waits for it
    assert_eq!(steps[2].report.start_us, 10_100);
}

#[test]
fn repeated_counts_are_noops() {
    let steps = run("0 2\n10 2\n10 5\n10 9", ControllerConfig::default());
    let kinds: Vec<ActionKind> = steps.iter().map(|s| s.action.kind).collect();
    assert_eq!(kinds, vec![ActionKind::Deploy, ActionKind::NoOp, ActionKind::ScaleOnly, ActionKind::NoOp]);
    assert_eq!(steps.last().unwrap().state.generation, 2);
}

#[test]
fn pl_executions_report_small_nonzero_mse() {
    for s in run("0 2\n10 3\n10 1", ControllerConfig::default()) {
        match s.state.config.domain {
            Domain::Pl => {
                let m = s.report.mse.unwrap();
                assert!(m > 0.0 && m < 1e-2, "{m}");
            }
            Domain::Apu => assert!(s.report.mse.is_none()),
        }
    }
}

#[test]
fn live_timing_is_internally_consistent() {
    let small = measure_with_seed(FftSize::P8, 50, 1).unwrap();
    let large = measure_with_seed(FftSize::P4096, 50, 1).unwrap();
    for m in [&small, &large] {
        assert!(m.min_us <= m.entry.exec_time_us && m.entry.exec_time_us <= m.max_us);
        assert_eq!(m.observations_us.len(), 50);
    }
    assert!(large.entry.exec_time_us > small.entry.exec_time_us);
}
