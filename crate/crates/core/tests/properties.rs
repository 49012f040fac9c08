use courant_core::bigtangent::{courant_bracket, dorfman, neutral_pairing, partial_of_function, Section};
use courant_core::chartfield::tensor::exterior_derivative;
use courant_core::chartfield::{Chart, Expr, Kind, TensorField};
use proptest::prelude::*;

fn chart() -> Chart {
    Chart::cube(&["x", "y", "z"], -1.0, 1.0).unwrap()
}

/// DSL source text; divisions keep a denominator ≥ 1.
fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        (-3i32..4).prop_map(|n| format!("{n}")),
        (1u32..9).prop_map(|n| format!("0.{n}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(1 + ({b})^2)")),
            (inner.clone(), 0u32..4).prop_map(|(a, n)| format!("({a})^{n}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*({a}))")),
            inner.prop_map(|a| format!("-{a}")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9f64..0.9, 3)
}

fn parse(t: &str) -> Expr {
    chart().parse(t).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn section(t: &[String; 6]) -> Section {
    Section::new(t[..3].iter().map(|s| parse(s)).collect(), t[3..].iter().map(|s| parse(s)).collect())
}

fn six() -> impl Strategy<Value = [String; 6]> {
    [expr_text(), expr_text(), expr_text(), expr_text(), expr_text(), expr_text()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_keeps_the_value(t in expr_text(), p in point()) {
        let c = chart();
        let e = parse(&t);
        let printed = e.display(c.names()).to_string();
        let back = c.parse(&printed).unwrap();
        let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
        prop_assert!(close(a, b, 1e-12), "{t} -> {printed}: {a} vs {b}");
    }

    #[test]
    fn derivative_matches_central_difference(t in expr_text(), p in point(), i in 0usize..3) {
        let e = parse(&t);
        let h = 1e-5;
        let (mut hi, mut lo) = (p.clone(), p.clone());
        hi[i] += h;
        lo[i] -= h;
        let fd = (e.eval(&hi).unwrap() - e.eval(&lo).unwrap()) / (2.0 * h);
        let sym = e.diff(i).eval(&p).unwrap();
        prop_assert!(close(sym, fd, 1e-5), "{t}: {sym} vs {fd}");
    }

    #[test]
    fn mixed_partials_commute(t in expr_text(), p in point()) {
        let e = parse(&t);
        let a = e.diff(0).diff(2).eval(&p).unwrap();
        let b = e.diff(2).diff(0).eval(&p).unwrap();
        prop_assert!(close(a, b, 1e-9));
    }

    #[test]
    fn d_squared_vanishes(t in [expr_text(), expr_text(), expr_text()], p in point()) {
        let a = TensorField::new(Kind::OneForm, 3, t.iter().map(|s| parse(s)).collect()).unwrap();
        let dd = exterior_derivative(&exterior_derivative(&a).unwrap()).unwrap();
        for c in dd.compressed() {
            prop_assert!(c.eval(&p).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn courant_bracket_is_skew(a in six(), b in six(), p in point()) {
        let (x, y) = (section(&a), section(&b));
        let s = courant_bracket(&x, &y).add(&courant_bracket(&y, &x));
        for c in s.stacked() {
            prop_assert!(c.eval(&p).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn courant_is_skewed_dorfman(a in six(), b in six(), p in point()) {
        // [𝒳,𝒴] = 𝒳∘𝒴 − ∂g(𝒳,𝒴), with ∂f = (0, ½df)
        let (x, y) = (section(&a), section(&b));
        let rhs = dorfman(&x, &y).sub(&partial_of_function(&neutral_pairing(&x, &y), 3));
        let s = courant_bracket(&x, &y).sub(&rhs);
        for c in s.stacked() {
            prop_assert!(c.eval(&p).unwrap().abs() < 1e-8);
        }
    }
}
