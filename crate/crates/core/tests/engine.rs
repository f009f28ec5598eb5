use std::sync::Arc;
use std::time::Duration;

use ecalp::daemon::{format_message, Daemon, Outcome};
use ecalp::kb::{KnowledgeState, ModuleId};
use ecalp::parser::{format_term, parse_clauses, parse_program, parse_query, parse_term};
use ecalp::solver::{Payload, SimulatedClock, Solver, TxOp};
use ecalp::term::TimePoint;
use ecalp::updates::{run_transaction, IntegrityConstraint, UpdateTransaction};

fn load(text: &str) -> KnowledgeState {
    KnowledgeState::empty().load_program(ModuleId::new("main"), &parse_program(text).unwrap())
}

fn first(solver: &Solver, goal: &str, var: &str) -> Option<String> {
    let q = parse_query(goal).unwrap();
    let v = q.variables.iter().find(|v| &*v.name == var).unwrap().clone();
    solver.solve_query(&q).next().map(|s| format_term(&s.unwrap().value(&v)))
}

#[test]
fn derivation_rules_and_arithmetic() {
    let solver = Solver::new(load(
        "len([], 0).\nlen([_|T], N) :- len(T, M), N is M + 1.\nbig(X) :- len(X, N), N > 2.",
    ));
    assert_eq!(first(&solver, "len([a,b,c], N)", "N").as_deref(), Some("3"));
    assert!(solver.prove(&[parse_term("big([a,b,c])").unwrap()]).unwrap());
    assert!(!solver.prove(&[parse_term("big([a])").unwrap()]).unwrap());
}

#[test]
fn transactions_commit_or_leave_state_unchanged() {
    let solver = Solver::new(load("integrity(forbidden(banned(X)))."));
    let add = |text: &str| TxOp::Add {
        oid: ModuleId::new("extra"),
        payload: Payload::Clauses(parse_clauses(text).unwrap()),
    };
    let ok = run_transaction(&solver, &UpdateTransaction::new(vec![add("member(ann).")]));
    let state = ok.state_or(solver.state());
    assert!(ok.is_committed());
    assert!(Solver::new(state.clone()).prove(&[parse_term("member(ann)").unwrap()]).unwrap());

    let bad = run_transaction(&Solver::new(state.clone()), &UpdateTransaction::new(vec![add("banned(bob).")]));
    assert!(!bad.is_committed());
    assert_eq!(bad.state_or(&state).fingerprint(), state.fingerprint());
}

#[test]
fn extra_constraints_guard_a_transaction() {
    let solver = Solver::new(load("p(a)."));
    let mut tx = UpdateTransaction::new(vec![TxOp::Add {
        oid: ModuleId::new("q"),
        payload: Payload::Clauses(parse_clauses("q(a).").unwrap()),
    }]);
    tx.extra_constraints = vec![IntegrityConstraint::mutex(parse_term("p(a)").unwrap(), parse_term("q(a)").unwrap())];
    assert!(!run_transaction(&solver, &tx).is_committed());
}

#[test]
fn history_replays_to_same_state() {
    let s = load("a.")
        .add_module(ModuleId::new("m"), parse_clauses("b. c.").unwrap())
        .remove_module(&ModuleId::new("main"));
    assert_eq!(KnowledgeState::replay(&s.history()).clause_sets(), s.clause_sets());
}

#[test]
fn daemon_reacts_to_injected_events() {
    let program = r#"
        eca(_, detect(alarm(Z), T), not(muted(Z)), sendMessage(ops, alarm(Z)), _, _).
        detect(E, T) :- occurs(E, T), consume(E).
        muted(z2).
    "#;
    let start = TimePoint::new(2006, 5, 1, 1, 0, 0).unwrap();
    let mut daemon = Daemon::new(load(program)).with_simulated_clock(Arc::new(SimulatedClock::new(start)));
    let inject = [(start.plus_seconds(1), parse_term("alarm(z1)").unwrap()), (start.plus_seconds(1), parse_term("alarm(z2)").unwrap())];
    let mut seen = Vec::new();
    daemon
        .run(Duration::from_secs(1), Some(3), None, &inject, &mut |r| {
            seen.extend(r.messages.iter().map(|(to, m)| (r.cycle, format_message(to, m))));
            if r.cycle == 1 {
                assert_eq!(r.outcomes[0].1, Outcome::EventAbsent);
            }
        })
        .unwrap();
    assert_eq!(seen, vec![(2, "NOTIFY ops alarm(z1)".to_string())]);
}
