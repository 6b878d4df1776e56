use std::cell::RefCell;
use std::rc::Rc;

use tcp_lab::evaluate::replay;
use tcp_lab_core::combinators::known_names;
use tcp_lab_core::{
    build, Approach, ApproachError, ApproachSpec, CycleContext, CycleRecord, ProjectHistory, RankedSuite, TestCaseId,
    TestExecution, TieBreak, Verdict,
};

/// Each cycle carries a marker case `m<index>` so the sentinel can tell which
/// cycles it has been shown.
fn history() -> ProjectHistory {
    let cycles = (0..12u64)
        .map(|i| {
            let mut runs: Vec<TestExecution> = (0..5)
                .map(|t| {
                    let verdict = if (i + t) % 4 == 0 { Verdict::Fail } else { Verdict::Pass };
                    TestExecution::new(TestCaseId::new(format!("T{t}")).unwrap(), 1.0 + t as f64, verdict).unwrap()
                })
                .collect();
            runs.push(TestExecution::new(TestCaseId::new(format!("m{i}")).unwrap(), 0.5, Verdict::Pass).unwrap());
            CycleRecord::new(i * 3, format!("j{i}"), "c", None, runs).unwrap()
        })
        .collect();
    ProjectHistory::new("p", cycles).unwrap()
}

fn marker(cases: &[TestCaseId]) -> u64 {
    cases.iter().find_map(|c| c.as_str().strip_prefix('m')).unwrap().parse().unwrap()
}

#[derive(Default)]
struct Log {
    observed: Vec<u64>,
    violations: Vec<String>,
    ranks: usize,
}

/// Delegates to an inner approach and checks that every rank call for a
/// cycle comes after exactly the observations of the cycles before it.
struct Sentinel {
    inner: Box<dyn Approach + Send>,
    log: Rc<RefCell<Log>>,
}

impl Approach for Sentinel {
    fn rank(&mut self, ctx: &CycleContext<'_>) -> Result<RankedSuite, ApproachError> {
        let current = marker(ctx.cases());
        {
            let mut log = self.log.borrow_mut();
            log.ranks += 1;
            let expected: Vec<u64> = (0..current).map(|k| k * 3).collect();
            if log.observed != expected {
                let seen = log.observed.clone();
                log.violations.push(format!("cycle {current}: saw {seen:?}"));
            }
        }
        self.inner.rank(ctx)
    }

    fn observe(&mut self, results: &[TestExecution]) {
        let cases: Vec<TestCaseId> = results.iter().map(|e| e.case().clone()).collect();
        self.log.borrow_mut().observed.push(marker(&cases) * 3);
        self.inner.observe(results)
    }

    fn reset(&mut self) {
        self.log.borrow_mut().observed.clear();
        self.inner.reset()
    }
}

#[test]
fn no_approach_sees_outcomes_before_ranking() {
    let h = history();
    for name in known_names() {
        let log = Rc::new(RefCell::new(Log::default()));
        let mut sentinel = Sentinel {
            inner: build(&ApproachSpec::named(name.clone())).unwrap(),
            log: log.clone(),
        };
        let rows = replay(&mut sentinel, &h, |_| TieBreak::Stable, false).unwrap();
        let log = log.borrow();
        assert_eq!(rows.len(), 12, "{name}");
        assert_eq!(log.ranks, 12, "{name}");
        assert!(log.violations.is_empty(), "{name}: {:?}", log.violations);
    }
}

#[test]
fn replay_matches_prioritize_command() {
    let h = history();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    tcp_lab::dataset::write_canonical(&h, std::fs::File::create(&path).unwrap()).unwrap();
    for name in ["P1.2", "P2", "fail_density", "P3.2"] {
        let spec = ApproachSpec::named(name);
        let mut approach = build(&spec).unwrap();
        let rows = replay(&mut approach, &h, |_| TieBreak::Stable, false).unwrap();
        for (cycle, row) in h.cycles().iter().zip(&rows) {
            let order = tcp_lab::cli::prioritize(&path, &spec, cycle.index()).unwrap();
            let apfd = cycle
                .is_failed()
                .then(|| tcp_lab_core::metrics::apfd(&order, cycle).unwrap());
            assert_eq!(apfd, row.0.apfd, "{name} cycle {}", cycle.index());
        }
    }
}
