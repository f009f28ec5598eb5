use proptest::prelude::*;

use super::*;
use crate::term::{is_variant, TimePoint};

const FLIGHT: &str = r#"
eca( every10Sec(), detect(request(Customer, Destination),T), find(Destination, Flight), book(Customer, Flight),!, notify(Customer, bookedUp(Destination)) ).
% time derivation rule
every10Sec() :- sysTime(T), interval( timespan(0,0,0,10),T).
% event derivation rule
detect(request(Customer, FlightDestination),T):-
    occurs(request(Customer,FlightDestination),T),
    consume(request(Customer,FlightDestination)).
% condition derivation rule
find(Destination,Flight) :- flight(Flight, Destination).
% action derivation rule
book(Cust, Flight) :-
    bookFlight(Flight, Cust),
    notify(Cust,flightBooked(Flight)).
% alternative action derivation rule
notify(Customer, Message):- sendMessage(Customer, Message).
"#;

#[test]
fn facts_and_rules() {
    let p = parse_program("f(1). r(X):-f(X).").unwrap();
    assert_eq!(p.clauses.len(), 2);
    assert!(p.clauses[0].is_fact());
    assert_eq!(p.clauses[1].body.len(), 1);
    assert_eq!(p.clauses[1].head.args()[0], p.clauses[1].body[0].args()[0]);
}

#[test]
fn flight_program() {
    let p = parse_program(FLIGHT).unwrap();
    assert_eq!(p.eca_rules.len(), 1);
    let derivation = p
        .clauses
        .iter()
        .filter(|c| c.head.name() != Some("eca"))
        .count();
    assert_eq!(derivation, 5);
    let eca = &p.eca_rules[0];
    assert_eq!(eca.args().len(), 6);
    assert_eq!(eca.args()[0], Term::atom("every10Sec"));
    assert_eq!(eca.args()[4], Term::atom("!"));
    assert!(eca.args().iter().all(|a| !a.is_blank()));
}

#[test]
fn integrity_facts_are_collected() {
    let p = parse_program("neg(p(x)).\nintegrity(xor(p(x), neg(p(x)))).").unwrap();
    assert_eq!(p.integrity_constraints.len(), 1);
    assert_eq!(p.integrity_constraints[0].name(), Some("xor"));
    assert_eq!(p.clauses.len(), 2);
}

#[test]
fn eca_short_forms_are_normalized() {
    let p = parse_program("eca(condition(c), action(a)). eca(e, c, a). eca(e, c, a, p). eca(t, e, _, a, _).").unwrap();
    let parts = |i: usize| -> Vec<String> {
        p.eca_rules[i].args().iter().map(format_term).collect()
    };
    assert_eq!(parts(0), ["_", "_", "condition(c)", "action(a)", "_", "_"]);
    assert_eq!(parts(1), ["_", "e", "c", "a", "_", "_"]);
    assert_eq!(parts(2), ["_", "e", "c", "a", "p", "_"]);
    assert_eq!(parts(3), ["t", "e", "_", "a", "_", "_"]);
    assert!(p.eca_rules[3].args()[2].is_blank());
}

#[test]
fn eca_arity_outside_range_is_rejected() {
    let err = parse_program("eca(a).").unwrap_err();
    assert!(err.message.contains("between 2 and 6"), "{err}");
    assert!(parse_program("eca(a,b,c,d,e,f,g).").is_err());
}

#[test]
fn anonymous_variables_are_distinct_outside_eca() {
    let p = parse_program("p(_, _).").unwrap();
    let args = p.clauses[0].head.args();
    assert_ne!(args[0], args[1]);
}

#[test]
fn queries() {
    let q = parse_query("holdsInterval([a,b],Interval)?").unwrap();
    assert_eq!(q.literals.len(), 1);
    let q = parse_query("f(X), g(X)?").unwrap();
    assert_eq!(q.literals.len(), 2);
    assert_eq!(q.literals[0].args()[0], q.literals[1].args()[0]);
    assert_eq!(q.variables.len(), 1);
    assert!(parse_query("?").is_err());
}

#[test]
fn embedded_queries_and_directives() {
    let p = parse_program("neg(p(x)).\ntestIntegrity(p(x))? %test integrity\n:- add(id1, \"f(1).\").").unwrap();
    assert_eq!(p.queries.len(), 1);
    assert_eq!(p.directives.len(), 1);
    assert_eq!(p.clauses.len(), 1);
}

#[test]
fn time_literals() {
    let t = parse_term("datetime(2005,1,1,0,0,1)").unwrap();
    assert_eq!(t, Term::Time(TimePoint::new(2005, 1, 1, 0, 0, 1).unwrap()));
    assert_eq!(format_term(&t), "datetime(2005,1,1,0,0,1)");
    assert!(matches!(parse_term("timespan(0,0,0,10)").unwrap(), Term::Span(_)));
    let err = parse_term("datetime(2005,13,1,0,0,1)").unwrap_err();
    assert!(err.message.contains("invalid time"));
}

#[test]
fn operators() {
    let t = parse_term("[T11,T12]<=[T21,T22]").unwrap();
    assert_eq!(t.name(), Some("<="));
    let t = parse_term("X is 1 + 2 * 3").unwrap();
    assert_eq!(format_term(&t), "X is 1 + 2 * 3");
    let t = parse_term("f(a - -3)").unwrap();
    assert_eq!(t.args()[0].args()[1], Term::int(-3));
    assert!(parse_term("a < b < c").is_err());
}

#[test]
fn errors_carry_position_and_expectations() {
    let err = parse_program("f(1).\ng(2 .").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(!err.expected.is_empty());
    let err = parse_program("f(\"open).").unwrap_err();
    assert!(err.message.contains("unterminated"));
    assert!(parse_program("X.").is_err());
    assert!(parse_program("not(p) :- q.").is_err());
}

#[test]
fn strings_and_quoted_atoms() {
    let t = parse_term(r#"add(id1,"r(1):-f(1).f(1).")"#).unwrap();
    assert_eq!(t.args()[1], Term::string("r(1):-f(1).f(1)."));
    let t = parse_term("'hello world'(x)").unwrap();
    assert_eq!(t.name(), Some("hello world"));
    assert_eq!(format_term(&t), "'hello world'(x)");
}

#[test]
fn format_examples() {
    let t = parse_term("f(a,[1,2|T])").unwrap();
    let back = parse_term(&format_term(&t)).unwrap();
    assert!(is_variant(&t, &back));
    assert_eq!(format_term(&Term::var("Foo", 3)), "Foo");
    let c = parse_program("p(X) :- q(X, Y), not(r(Y)).").unwrap();
    assert_eq!(format_clause(&c.clauses[0]), "p(X) :- q(X,Y), not(r(Y)).");
}

#[test]
fn clause_order_is_source_order() {
    let p = parse_program("c(1). a(1). b(1). a(2).").unwrap();
    let heads: Vec<String> = p.clauses.iter().map(|c| format_term(&c.head)).collect();
    assert_eq!(heads, ["c(1)", "a(1)", "b(1)", "a(2)"]);
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        "[a-z][a-z0-9_]{0,4}".prop_map(|s| Term::atom(&s)),
        any::<i32>().prop_map(|i| Term::int(i.into())),
        "[ -~]{0,6}".prop_map(|s| Term::string(&s)),
        (0u64..4).prop_map(|i| Term::var(["X", "Y", "Zed", "_"][i as usize], i)),
        (1990i32..2030, 1u32..13, 1u32..29, 0u32..24, 0u32..60, 0u32..60)
            .prop_map(|(y, mo, d, h, mi, s)| Term::Time(TimePoint::new(y, mo, d, h, mi, s).unwrap())),
        Just(Term::atom("hello world")),
        Just(Term::nil()),
    ];
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            ("[a-z]{1,3}", prop::collection::vec(inner.clone(), 1..4))
                .prop_map(|(f, args)| Term::compound(&f, args)),
            (prop::sample::select(vec!["<=", "=", ",", "+", "-", "*", ":-", "is"]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Term::compound(op, vec![l, r])),
            (prop::collection::vec(inner.clone(), 1..4), prop::option::of(inner))
                .prop_map(|(items, tail)| Term::list(items, tail)),
        ]
    })
}

proptest! {
    #[test]
    fn format_then_parse_round_trips(t in arb_term()) {
        let text = format_term(&t);
        let back = parse_term(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert!(is_variant(&t, &back), "{} reparsed as {}", text, format_term(&back));
    }

    #[test]
    fn parsing_never_panics(s in "\\PC{0,60}") {
        let _ = parse_program(&s);
        let _ = parse_query(&s);
    }

    #[test]
    fn parsing_structured_noise_never_panics(s in "[a-zA-Z_0-9(),.\\[\\]|:\\-\"'%?! <=]{0,80}") {
        let _ = parse_program(&s);
    }
}
