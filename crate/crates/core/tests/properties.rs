//! Randomized properties over the filter algebra and the header parser.

mod common;

use proptest::prelude::*;

use corpus_harvest::chat_header::{parse_header, Field, ParseMode};
use corpus_harvest::criteria::{eval_expr, parse_expr, FilterExpr};

use common::gen::{arb_code, arb_expr, arb_header};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Pretty-printing then reparsing reproduces the AST exactly.
    #[test]
    fn print_parse_round_trip(expr in arb_expr()) {
        let printed = expr.to_string();
        let reparsed = parse_expr(&printed)
            .unwrap_or_else(|e| panic!("failed to reparse {printed:?}: {e}"));
        prop_assert_eq!(reparsed, expr);
    }

    /// Printing is a fixed point after one parse.
    #[test]
    fn print_is_stable(expr in arb_expr()) {
        let once = expr.to_string();
        let twice = parse_expr(&once).unwrap().to_string();
        prop_assert_eq!(once, twice);
    }

    /// Evaluation is total: no panic for any expression/header pair.
    #[test]
    fn eval_is_total(expr in arb_expr(), header in arb_header()) {
        let _ = eval_expr(&expr, &header);
    }

    #[test]
    fn double_negation(expr in arb_expr(), header in arb_header()) {
        let wrapped = FilterExpr::Not(Box::new(FilterExpr::Not(Box::new(expr.clone()))));
        prop_assert_eq!(eval_expr(&wrapped, &header), eval_expr(&expr, &header));
    }

    #[test]
    fn de_morgan(a in arb_expr(), b in arb_expr(), header in arb_header()) {
        let not_and = FilterExpr::Not(Box::new(FilterExpr::And(vec![a.clone(), b.clone()])));
        let or_nots = FilterExpr::Or(vec![
            FilterExpr::Not(Box::new(a)),
            FilterExpr::Not(Box::new(b)),
        ]);
        prop_assert_eq!(eval_expr(&not_and, &header), eval_expr(&or_nots, &header));
    }

    /// An unbounded age range asks only whether the age is present.
    #[test]
    fn unbounded_age_range_is_nonempty_age(header in arb_header(), code in arb_code()) {
        let range = FilterExpr::AgeInRange(code.clone(), 0.0, f64::INFINITY);
        let nonempty = FilterExpr::NonEmpty(code, Field::Age);
        prop_assert_eq!(eval_expr(&range, &header), eval_expr(&nonempty, &header));
    }

    /// The parser rejects or accepts arbitrary input without panicking.
    #[test]
    fn parser_never_panics(src in "\\PC{0,80}") {
        let _ = parse_expr(&src);
    }

    /// The lenient header parser never panics on arbitrary text.
    #[test]
    fn header_parser_never_panics(text in "\\PC{0,400}") {
        let _ = parse_header(&text, ParseMode::Lenient);
        let _ = parse_header(&text, ParseMode::Strict);
    }
}
