//! Referenced tables and structural features derived from normalized trees.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{AstNode, QueryAst};

/// Structural shape of one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuralFeatures {
    pub join_count: usize,
    /// Boolean atoms in WHERE, HAVING and ON clauses, at every nesting level.
    pub predicate_count: usize,
    /// Maximum subquery depth; the top-level query is depth 0.
    pub nesting_depth: usize,
    /// count/sum/avg/min/max calls plus window-function calls.
    pub aggregate_count: usize,
    pub token_length: usize,
}

impl StructuralFeatures {
    /// Sum of the structural counts, used to rank seed queries.
    pub fn richness(&self) -> usize {
        self.join_count + self.predicate_count + self.nesting_depth + self.aggregate_count
    }
}

const AGGREGATES: [&str; 5] = ["count", "sum", "avg", "min", "max"];
const PREDICATE_SITES: [&str; 3] = ["selection", "having", "On"];

/// Base tables referenced anywhere in the query. Aliases never appear since
/// only table factors are inspected; CTE names are excluded.
pub fn referenced_tables(ast: &QueryAst) -> BTreeSet<String> {
    let mut ctes = BTreeSet::new();
    let mut tables = BTreeSet::new();
    ast.root().walk(&mut |node| match node.kind() {
        "cte_tables" => {
            if let Some(name) = node
                .children
                .iter()
                .find(|c| c.kind() == "alias")
                .and_then(|alias| alias.children.iter().find(|c| c.kind() == "Ident"))
                .and_then(AstNode::payload)
            {
                ctes.insert(name.to_string());
            }
        }
        "Table" => {
            if let Some(name) = node
                .children
                .iter()
                .take_while(|c| c.kind() == "Identifier")
                .last()
                .and_then(AstNode::payload)
            {
                tables.insert(name.to_string());
            }
        }
        _ => {}
    });
    tables.retain(|t| !ctes.contains(t));
    tables
}

/// Structural features; `token_length` is supplied by the caller since it
/// derives from the raw text rather than the tree.
pub fn structural_features(ast: &QueryAst, token_length: usize) -> StructuralFeatures {
    let mut f = StructuralFeatures { token_length, ..Default::default() };
    ast.root().walk(&mut |node| match node.kind() {
        "joins" => f.join_count += 1,
        "Select" => {
            let from_items = node.children.iter().filter(|c| c.kind() == "from").count();
            f.join_count += from_items.saturating_sub(1);
        }
        k if PREDICATE_SITES.contains(&k) => {
            f.predicate_count += node.children.iter().map(boolean_atoms).sum::<usize>();
        }
        "Function" => {
            let name = node
                .children
                .iter()
                .take_while(|c| c.kind() == "Identifier")
                .last()
                .and_then(AstNode::payload);
            let is_window = node.children.iter().any(|c| c.kind() == "over");
            if is_window || name.is_some_and(|n| AGGREGATES.contains(&n)) {
                f.aggregate_count += 1;
            }
        }
        _ => {}
    });
    f.nesting_depth = max_query_depth(ast.root(), true, 0);
    f
}

fn boolean_atoms(node: &AstNode) -> usize {
    match node.kind() {
        "BinaryOp" => {
            let is_connective = node
                .children
                .iter()
                .any(|c| c.kind() == "op" && matches!(c.payload(), Some("And" | "Or" | "Xor")));
            if is_connective {
                node.children.iter().filter(|c| c.kind() != "op").map(boolean_atoms).sum()
            } else {
                1
            }
        }
        "Nested" => node.children.iter().map(boolean_atoms).sum::<usize>().max(1),
        "UnaryOp" if node.children.iter().any(|c| c.kind() == "op" && c.payload() == Some("Not")) => {
            node.children.iter().filter(|c| c.kind() != "op").map(boolean_atoms).sum::<usize>().max(1)
        }
        _ => 1,
    }
}

fn max_query_depth(node: &AstNode, is_root: bool, depth: usize) -> usize {
    let here = if !is_root && node.kind() == "Query" { depth + 1 } else { depth };
    node.children
        .iter()
        .map(|c| max_query_depth(c, false, here))
        .max()
        .unwrap_or(here)
        .max(here)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{parse, tokenize};

    fn feats(sql: &str) -> StructuralFeatures {
        let ast = parse(sql).unwrap();
        structural_features(&ast, tokenize(sql).len())
    }

    fn tables(sql: &str) -> Vec<String> {
        referenced_tables(&parse(sql).unwrap()).into_iter().collect()
    }

    #[test]
    fn select_one_has_no_structure() {
        let f = feats("SELECT 1");
        assert_eq!((f.join_count, f.predicate_count, f.nesting_depth, f.aggregate_count), (0, 0, 0, 0));
        assert_eq!(f.token_length, 2);
    }

    #[test]
    fn on_and_where_atoms_both_count() {
        let f = feats("SELECT c, COUNT(*) FROM a JOIN b ON a.x=b.x WHERE a.y>5 GROUP BY c");
        assert_eq!((f.join_count, f.predicate_count, f.nesting_depth, f.aggregate_count), (1, 2, 0, 1));
    }

    #[test]
    fn subquery_in_where_nests_once() {
        let f = feats("SELECT * FROM t WHERE x IN (SELECT y FROM u WHERE z = 1)");
        assert_eq!(f.nesting_depth, 1);
        assert_eq!(f.predicate_count, 2);
    }

    #[test]
    fn connectives_and_negation() {
        let f = feats("SELECT * FROM t WHERE (a = 1 OR b = 2) AND NOT (c = 3 AND d = 4) HAVING COUNT(*) > 1");
        assert_eq!(f.predicate_count, 5);
        assert_eq!(f.aggregate_count, 1);
    }

    #[test]
    fn window_function_counts_as_aggregate() {
        let f = feats("SELECT rank() OVER (PARTITION BY g ORDER BY v) FROM t");
        assert_eq!(f.aggregate_count, 1);
    }

    #[test]
    fn comma_join_counts() {
        let f = feats("SELECT * FROM a, b, c WHERE a.x = b.x AND b.y = c.y");
        assert_eq!(f.join_count, 2);
    }

    #[test]
    fn join_tables() {
        assert_eq!(tables("SELECT * FROM a JOIN b ON a.x=b.x"), vec!["a", "b"]);
    }

    #[test]
    fn cte_names_excluded() {
        assert_eq!(tables("WITH c AS (SELECT * FROM t) SELECT * FROM c"), vec!["t"]);
    }

    #[test]
    fn aliases_resolve_to_base_tables() {
        assert_eq!(tables("SELECT o.id FROM Orders AS o JOIN customers c ON o.cid = c.id"), vec!["customers", "orders"]);
    }

    #[test]
    fn nested_fixture_tables_and_depth() {
        // Hand enumeration: depth 0 reads orders; the derived table (depth 1)
        // reads order_items; its EXISTS probe (depth 2) reads products; the
        // scalar subquery (depth 3) reads categories; the IN list (depth 4)
        // reads region.
        let sql = "SELECT o.id FROM orders o JOIN (SELECT oi.order_id FROM order_items oi \
                   WHERE EXISTS (SELECT 1 FROM products p WHERE p.id = oi.product_id \
                   AND p.category = (SELECT MAX(c.name) FROM categories c \
                   WHERE c.region IN (SELECT r.name FROM region r)))) d ON d.order_id = o.id";
        assert_eq!(tables(sql), vec!["categories", "order_items", "orders", "products", "region"]);
        assert_eq!(feats(sql).nesting_depth, 4);
    }

    #[test]
    fn cte_body_counts_as_nesting() {
        assert_eq!(feats("WITH c AS (SELECT * FROM t) SELECT * FROM c").nesting_depth, 1);
    }
}
