use std::collections::BTreeSet;

use proptest::prelude::*;

use super::oracle::brute_force;
use super::*;
use crate::parser::{parse_program, parse_query, parse_term};

fn t(s: &str) -> Term {
    parse_term(s).unwrap()
}

fn kb(text: &str) -> Solver {
    let mut state = KnowledgeState::empty();
    state = state.load_program(ModuleId::new("main"), &parse_program(text).unwrap());
    Solver::new(state)
}

fn answers(solver: &Solver, query: &str, var: &str) -> Vec<String> {
    let q = parse_query(query).unwrap();
    let v = q.variables.iter().find(|v| &*v.name == var).cloned();
    solver
        .solve_query(&q)
        .map(|r| {
            let r = r.unwrap();
            v.as_ref().map_or_else(String::new, |v| format_term(&r.value(v)))
        })
        .collect()
}

fn with_events(mut state: KnowledgeState, events: &[(&str, i64)]) -> KnowledgeState {
    for (e, time) in events {
        state = record_occurrence(&state, &t(e), &Term::int(*time));
    }
    state
}

fn intervals(solver: &Solver, expr: &str) -> Vec<(i64, i64)> {
    let occs = occurrences(solver.state());
    Matcher::new(solver, &occs, 1000)
        .matches(&EventExpr::from_term(&t(expr)).unwrap(), &Substitution::new())
        .unwrap()
        .into_iter()
        .map(|m| match (m.start, m.end) {
            (Instant::Int(s), Instant::Int(e)) => (s, e),
            _ => panic!("integer times expected"),
        })
        .collect()
}

#[test]
fn atomic_occurrence_spans_a_point() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("a", 3)]));
    assert_eq!(answers(&s, "event([a], T)", "T"), vec!["[3,3]"]);
}

#[test]
fn occurrences_live_in_their_instance_sequence() {
    let s = with_events(KnowledgeState::empty(), &[("req(1)", 1), ("a", 2)]);
    assert!(s.contains_module(&ModuleId::new("eis(req)")));
    assert!(s.contains_module(&ModuleId::new("eis(a)")));
    assert_eq!(occurrences(&s).len(), 2);
}

#[test]
fn holds_interval_pairs_endpoints() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("a", 1), ("b", 5), ("b", 7)]));
    let mut got = answers(&s, "holdsInterval([a,b], I)", "I");
    got.sort();
    assert_eq!(got, vec!["[1,5]", "[1,7]"]);
}

#[test]
fn holds_interval_allows_the_same_occurrence_twice() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("a", 4)]));
    assert_eq!(answers(&s, "holdsInterval([a,a], I)", "I"), vec!["[4,4]"]);
}

#[test]
fn terminator_breaks_interval() {
    let base = kb("terminates(c, [a,b], [T1,T2]).");
    let s = Solver::new(with_events(base.state().clone(), &[("a", 1), ("c", 3), ("b", 5), ("b", 2)]));
    assert_eq!(answers(&s, "holdsInterval([a,b], I)", "I"), vec!["[1,2]"]);
    assert!(s.prove(&parse_query("broken(1, [a,b], 5)").unwrap().literals).unwrap());
    assert!(!s.prove(&parse_query("broken(1, [a,b], 2)").unwrap().literals).unwrap());
}

#[test]
fn terminator_at_endpoint_does_not_break() {
    let base = kb("terminates(c, [a,b], [T1,T2]).");
    let s = Solver::new(with_events(base.state().clone(), &[("a", 1), ("c", 1), ("b", 5)]));
    assert_eq!(answers(&s, "holdsInterval([a,b], I)", "I"), vec!["[1,5]"]);
}

#[test]
fn context_restricts_terminators() {
    let base = kb("terminates(c, [a,b], [T1,T2]). terminates(d, [a,b], [T1,T2]).");
    let s = Solver::new(with_events(base.state().clone(), &[("a", 1), ("d", 3), ("b", 5)]));
    assert_eq!(answers(&s, "holdsInterval([a,b], I, [c])", "I").len(), 1);
    assert_eq!(answers(&s, "holdsInterval([a,b], I, [d])", "I").len(), 0);
    assert_eq!(answers(&s, "holdsInterval([a,b], I)", "I").len(), 0);
}

#[test]
fn patterns_bind_through_event_queries() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("req(7)", 1), ("ack(7)", 4), ("ack(8)", 5)]));
    assert_eq!(answers(&s, "event(sequence(req(X), ack(X)), T)", "T"), vec!["[1,4]"]);
}

#[test]
fn sequence_requires_order() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("b", 1), ("a", 2), ("b", 3)]));
    assert_eq!(intervals(&s, "sequence(a, b)"), vec![(2, 3)]);
}

#[test]
fn conjunction_ignores_order() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("b", 1), ("a", 2)]));
    assert_eq!(intervals(&s, "conjunction(a, b)"), vec![(1, 2)]);
}

#[test]
fn negation_inside_window() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("a", 1), ("c", 2), ("b", 3), ("b", 6), ("a", 4)]));
    let got = intervals(&s, "not(c, [a, b])");
    assert!(!got.contains(&(1, 3)));
    assert!(got.contains(&(4, 6)));
}

#[test]
fn periodic_ticks_strictly_inside() {
    let s = Solver::new(with_events(KnowledgeState::empty(), &[("a", 0), ("b", 10)]));
    assert_eq!(intervals(&s, "periodic(3, [a, b])"), vec![(3, 3), (6, 6), (9, 9)]);
}

#[test]
fn detection_with_consumption_uses_each_leaf_once() {
    let base = kb("detection(ab, sequence(a, b), [consume(a, first), consume(b, first)]).");
    let s = Solver::new(with_events(base.state().clone(), &[("a", 1), ("a", 2), ("b", 3), ("b", 4)]));
    let rules = detection_rules(s.state()).unwrap();
    let (found, after) = detect(&s, &rules[0]).unwrap();
    let got: Vec<(Instant, Instant)> = found.iter().map(|d| (d.start, d.end)).collect();
    assert_eq!(got, vec![(Instant::Int(1), Instant::Int(3)), (Instant::Int(2), Instant::Int(4))]);
    assert!(!after.contains_module(&ModuleId::new("eis(a)")) || occurrences(&after).iter().all(|o| o.event != t("a")));
    let recorded: Vec<_> = occurrences(&after).into_iter().filter(|o| o.event == t("ab")).collect();
    assert_eq!(recorded.len(), 2);
}

#[test]
fn detection_without_consumption_records_all_once() {
    let base = kb("detection(ab, sequence(a, b)).");
    let s = Solver::new(with_events(base.state().clone(), &[("a", 1), ("a", 2), ("b", 3)]));
    let rule = detection_rules(s.state()).unwrap().remove(0);
    let (found, after) = detect(&s, &rule).unwrap();
    assert_eq!(found.len(), 2);
    let again = detect(&s.clone().with_state(after), &rule).unwrap().0;
    assert!(again.is_empty());
}

#[test]
fn detect_builtin_yields_intents() {
    let base = kb("detection(ab, sequence(a, b), [consume(a, all)]).");
    let s = Solver::new(with_events(base.state().clone(), &[("a", 1), ("b", 3)]));
    let q = parse_query("detect(ab, T)").unwrap();
    let sols = s.all(&q.literals).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(format_term(&sols[0].value(&q.variables[0])), "[1,3]");
    assert_eq!(sols[0].intents.len(), 2);
}

#[test]
fn malformed_expression_is_an_error() {
    let s = Solver::new(KnowledgeState::empty());
    let err = s.solve_query(&parse_query("event(any(3, [a, b]), T)").unwrap()).next().unwrap();
    assert!(err.is_err());
}

#[test]
fn consume_policies() {
    let s = with_events(KnowledgeState::empty(), &[("a", 1), ("a", 2), ("a", 3)]);
    let key = ModuleId::new("eis(a)");
    let times = |st: &KnowledgeState| -> Vec<Instant> { occurrences(st).iter().map(|o| o.start).collect() };
    assert_eq!(times(&consume(&s, &key, ConsumePolicy::First)), vec![Instant::Int(2), Instant::Int(3)]);
    assert_eq!(times(&consume(&s, &key, ConsumePolicy::Last)), vec![Instant::Int(1), Instant::Int(2)]);
    assert!(times(&consume(&s, &key, ConsumePolicy::All)).is_empty());
    assert_eq!(times(&consume(&s, &key, ConsumePolicy::None)).len(), 3);
}

fn leaf_strategy() -> impl Strategy<Value = String> {
    prop_oneof![Just("a".to_string()), Just("b".to_string()), Just("c".to_string())]
}

fn expr_strategy() -> impl Strategy<Value = String> {
    leaf_strategy().prop_recursive(3, 12, 3, |inner| {
        let two = (inner.clone(), inner.clone());
        prop_oneof![
            two.clone().prop_map(|(x, y)| format!("sequence({x}, {y})")),
            two.clone().prop_map(|(x, y)| format!("conjunction({x}, {y})")),
            two.clone().prop_map(|(x, y)| format!("or({x}, {y})")),
            two.clone().prop_map(|(x, y)| format!("xor({x}, {y})")),
            two.clone().prop_map(|(x, y)| format!("concurrent({x}, {y})")),
            (inner.clone(), leaf_strategy(), leaf_strategy()).prop_map(|(x, i, j)| format!("not({x}, [{i}, {j}])")),
            (inner.clone(), leaf_strategy(), leaf_strategy())
                .prop_map(|(x, i, j)| format!("aperiodic({x}, [{i}, {j}])")),
            (1i64..4, leaf_strategy(), leaf_strategy()).prop_map(|(p, i, j)| format!("periodic({p}, [{i}, {j}])")),
            (inner.clone(), inner.clone(), inner).prop_map(|(x, y, z)| format!("any(2, [{x}, {y}, {z}])")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matcher_agrees_with_exhaustive_oracle(
        expr in expr_strategy(),
        events in proptest::collection::vec((leaf_strategy(), 0i64..8), 0..6),
    ) {
        let mut state = KnowledgeState::empty();
        for (e, time) in &events {
            state = record_occurrence(&state, &t(e), &Term::int(*time));
        }
        let solver = Solver::new(state);
        let occs = occurrences(solver.state());
        let parsed = EventExpr::from_term(&t(&expr)).unwrap();
        let got: BTreeSet<(Instant, Instant, Vec<u64>)> = Matcher::new(&solver, &occs, 0)
            .matches(&parsed, &Substitution::new())
            .unwrap()
            .into_iter()
            .map(|m| (m.start, m.end, m.used))
            .collect();
        prop_assert_eq!(got, brute_force(&parsed, &occs), "expression {}", expr);
    }

    #[test]
    fn matches_are_sorted_and_well_formed(
        expr in expr_strategy(),
        events in proptest::collection::vec((leaf_strategy(), 0i64..8), 0..6),
    ) {
        let mut state = KnowledgeState::empty();
        for (e, time) in &events {
            state = record_occurrence(&state, &t(e), &Term::int(*time));
        }
        let solver = Solver::new(state);
        let occs = occurrences(solver.state());
        let ms = Matcher::new(&solver, &occs, 0)
            .matches(&EventExpr::from_term(&t(&expr)).unwrap(), &Substitution::new())
            .unwrap();
        for w in ms.windows(2) {
            prop_assert!((w[0].end, w[0].start) <= (w[1].end, w[1].start));
        }
        for m in &ms {
            prop_assert!(m.start <= m.end);
            prop_assert!(!m.used.is_empty());
        }
    }
}
