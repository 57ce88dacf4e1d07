use proptest::prelude::*;
use sqlforge::analysis::{analyze, parse, structural_features};
use sqlforge::similarity::sim_ast;

/// Query shape, rendered with interchangeable spellings and constants.
#[derive(Debug, Clone)]
struct Shape {
    cols: Vec<usize>,
    join: bool,
    preds: Vec<(usize, usize, Lit)>,
    or_preds: bool,
    agg: Option<usize>,
    subquery: bool,
    order: bool,
    limit: bool,
}

#[derive(Debug, Clone, Copy)]
enum Lit {
    Int,
    Real,
    Text,
}

const COLS: [&str; 4] = ["id", "name", "total", "region_id"];
const OPS: [&str; 4] = ["=", ">", "<=", "<>"];

fn shape() -> impl Strategy<Value = Shape> {
    (
        prop::collection::vec(0usize..4, 1..4),
        any::<bool>(),
        prop::collection::vec((0usize..4, 0usize..4, prop_oneof![Just(Lit::Int), Just(Lit::Real), Just(Lit::Text)]), 0..4),
        any::<bool>(),
        prop::option::of(0usize..3),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(cols, join, preds, or_preds, agg, subquery, order, limit)| Shape {
            cols,
            join,
            preds,
            or_preds,
            agg,
            subquery,
            order,
            limit,
        })
}

/// Renders `s`. `upper` flips identifier case; `k` varies every constant.
fn render(s: &Shape, upper: bool, k: i64) -> String {
    let id = |x: &str| if upper { x.to_uppercase() } else { x.to_string() };
    let lit = |l: Lit, i: usize| match l {
        Lit::Int => format!("{}", k * 7 + i as i64),
        Lit::Real => format!("{}.5", k + i as i64),
        Lit::Text => format!("'v{}_{i}'", k),
    };
    let (t, u) = (id("orders"), id("customers"));
    let mut sql = String::from("SELECT ");
    let cols: Vec<String> = s.cols.iter().map(|&c| format!("o.{}", id(COLS[c]))).collect();
    match s.agg {
        Some(a) => sql += &format!("{}, {}(o.{})", cols[0], ["COUNT", "SUM", "MAX"][a], id("total")),
        None => sql += &cols.join(", "),
    }
    sql += &format!(" FROM {t} AS o");
    if s.join {
        sql += &format!(" JOIN {u} AS c ON o.{} = c.{}", id("region_id"), id("id"));
    }
    let mut preds: Vec<String> =
        s.preds.iter().enumerate().map(|(i, (c, op, l))| format!("o.{} {} {}", id(COLS[*c]), OPS[*op], lit(*l, i))).collect();
    if s.subquery {
        preds.push(format!("o.{} IN (SELECT {} FROM {u} WHERE {} > {})", id("id"), id("id"), id("total"), k));
    }
    if !preds.is_empty() {
        sql += " WHERE ";
        sql += &preds.join(if s.or_preds { " OR " } else { " AND " });
    }
    if s.agg.is_some() {
        sql += &format!(" GROUP BY {}", cols[0]);
    }
    if s.order {
        sql += &format!(" ORDER BY {} DESC", cols[0]);
    }
    if s.limit {
        sql += &format!(" LIMIT {}", 10 + k.rem_euclid(50));
    }
    sql
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rendering_round_trips(s in shape(), k in 0i64..1000) {
        let ast = parse(&render(&s, false, k)).unwrap();
        let again = parse(ast.render()).unwrap();
        prop_assert_eq!(&again, &ast);
        prop_assert_eq!(again.render(), ast.render());
    }

    #[test]
    fn case_and_constants_do_not_change_the_tree(s in shape(), k1 in 0i64..1000, k2 in 0i64..1000, upper in any::<bool>()) {
        let a = parse(&render(&s, false, k1)).unwrap();
        let b = parse(&render(&s, upper, k2)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(sim_ast(&a, &b), 1.0);
    }

    #[test]
    fn features_are_deterministic(s in shape(), k in 0i64..1000) {
        let sql = render(&s, false, k);
        let (a, b) = (analyze(&sql).unwrap(), analyze(&sql).unwrap());
        prop_assert_eq!(a.features, b.features);
        prop_assert_eq!(structural_features(&a.ast, a.tokens.len()), a.features);
        prop_assert_eq!(a.features.join_count, usize::from(s.join));
        prop_assert_eq!(a.features.nesting_depth, usize::from(s.subquery));
        // Each WHERE atom once, the ON equality once, the subquery's own filter once.
        let atoms = s.preds.len() + usize::from(s.join) + 2 * usize::from(s.subquery);
        prop_assert_eq!(a.features.predicate_count, atoms);
    }
}
