//! Random query construction over the schema block of a generation prompt.

use std::sync::LazyLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

static TABLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^CREATE TABLE (\w+) \($").expect("valid regex"));
static COLUMN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^  (\w+) (\w+),? -- ([a-z-]+)(?:; (range|values|examples):? (.*))?$").expect("valid regex"));
static JOIN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^  (\w+)\.(\w+) = (\w+)\.(\w+)$").expect("valid regex"));
static LITERAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"'((?:[^']|'')*)'|(-?\d+(?:\.\d+)?(?:[eE]-?\d+)?)").expect("valid regex"));

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Lit {
    Num(f64),
    Text(String),
}

impl Lit {
    fn sql(&self) -> String {
        match self {
            Lit::Num(v) => fmt_num(*v),
            Lit::Text(s) => format!("'{}'", s.replace('\'', "''")),
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Col {
    pub name: String,
    pub integer: bool,
    pub class: String,
    pub range: Option<(Lit, Lit)>,
    pub values: Vec<Lit>,
}

impl Col {
    fn is_key(&self) -> bool {
        self.name == "id" || self.name.ends_with("_id")
    }

    fn is_measure(&self) -> bool {
        self.class == "numeric" && !self.is_key()
    }

    fn is_group(&self) -> bool {
        self.class == "enum-like" || self.class == "date"
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Table {
    pub name: String,
    pub cols: Vec<Col>,
}

#[derive(Clone, Debug)]
pub(crate) struct Join {
    pub child: usize,
    pub child_col: String,
    pub parent: usize,
    pub parent_col: String,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct PromptSchema {
    pub tables: Vec<Table>,
    pub joins: Vec<Join>,
}

fn literals(text: &str) -> Vec<Lit> {
    LITERAL
        .captures_iter(text)
        .filter_map(|c| match (c.get(1), c.get(2)) {
            (Some(s), _) => Some(Lit::Text(s.as_str().replace("''", "'"))),
            (_, Some(n)) => n.as_str().parse().ok().map(Lit::Num),
            _ => None,
        })
        .collect()
}

/// Reads the annotated DDL and join paths that the generation prompt embeds.
pub(crate) fn parse_schema(prompt: &str) -> PromptSchema {
    let mut s = PromptSchema::default();
    let mut joins = Vec::new();
    for line in prompt.lines() {
        if let Some(c) = TABLE.captures(line) {
            s.tables.push(Table { name: c[1].to_string(), cols: Vec::new() });
        } else if let (Some(c), Some(t)) = (COLUMN.captures(line), s.tables.last_mut()) {
            let mut col = Col {
                name: c[1].to_string(),
                integer: c[2].eq_ignore_ascii_case("INTEGER"),
                class: c[3].to_string(),
                range: None,
                values: Vec::new(),
            };
            if let (Some(kind), Some(rest)) = (c.get(4), c.get(5)) {
                let lits = literals(rest.as_str());
                if kind.as_str() == "range" && lits.len() == 2 {
                    col.range = Some((lits[0].clone(), lits[1].clone()));
                } else {
                    col.values = lits;
                }
            }
            t.cols.push(col);
        } else if let Some(c) = JOIN.captures(line) {
            joins.push((c[1].to_string(), c[2].to_string(), c[3].to_string(), c[4].to_string()));
        }
    }
    let idx = |name: &str| s.tables.iter().position(|t| t.name == name);
    for (ct, cc, pt, pc) in joins {
        if let (Some(child), Some(parent)) = (idx(&ct), idx(&pt)) {
            s.joins.push(Join { child, child_col: cc, parent, parent_col: pc });
        }
    }
    s
}

/// A table occurrence in a FROM clause.
#[derive(Clone, Debug)]
struct Occ {
    table: usize,
    alias: String,
}

pub(crate) struct QueryGen<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub schema: &'a PromptSchema,
}

impl QueryGen<'_> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn table(&self, o: &Occ) -> &Table {
        &self.schema.tables[o.table]
    }

    fn walk_upto(&mut self, hi: usize) -> (Vec<Occ>, Vec<String>) {
        let max = self.rng.random_range(1..=hi);
        self.walk(max)
    }

    /// A connected set of up to `max` tables with its join conditions.
    fn walk(&mut self, max: usize) -> (Vec<Occ>, Vec<String>) {
        let start = self.rng.random_range(0..self.schema.tables.len());
        let mut occ = vec![Occ { table: start, alias: "t0".into() }];
        let mut conds = Vec::new();
        while occ.len() < max {
            let mut options: Vec<(usize, String)> = Vec::new();
            for j in &self.schema.joins {
                for o in &occ {
                    if o.table == j.child && !occ.iter().any(|x| x.table == j.parent) {
                        options.push((j.parent, format!("{}.{} = {{}}.{}", o.alias, j.child_col, j.parent_col)));
                    } else if o.table == j.parent && !occ.iter().any(|x| x.table == j.child) {
                        options.push((j.child, format!("{{}}.{} = {}.{}", j.child_col, o.alias, j.parent_col)));
                    }
                }
            }
            let Some((t, cond)) = options.choose(self.rng).cloned() else { break };
            let alias = format!("t{}", occ.len());
            conds.push(cond.replace("{}", &alias));
            occ.push(Occ { table: t, alias });
        }
        (occ, conds)
    }

    fn from_clause(&mut self, occ: &[Occ], conds: &[String]) -> String {
        let mut out = format!("FROM {} {}", self.table(&occ[0]).name, occ[0].alias);
        for (o, c) in occ[1..].iter().zip(conds) {
            let kind = if self.chance(0.15) { "LEFT JOIN" } else { "JOIN" };
            out.push_str(&format!(" {kind} {} {} ON {c}", self.table(o).name, o.alias));
        }
        out
    }

    fn cols_where(&self, occ: &[Occ], f: impl Fn(&Col) -> bool) -> Vec<(String, Col)> {
        occ.iter()
            .flat_map(|o| self.table(o).cols.iter().filter(|c| f(c)).map(|c| (o.alias.clone(), c.clone())))
            .collect()
    }

    fn pick_col(&mut self, occ: &[Occ], f: impl Fn(&Col) -> bool) -> Option<(String, Col)> {
        self.cols_where(occ, f).choose(self.rng).cloned()
    }

    fn number_in(&mut self, col: &Col) -> String {
        let (lo, hi) = match &col.range {
            Some((Lit::Num(a), Lit::Num(b))) => (*a, *b),
            _ => (0.0, 100.0),
        };
        let v = lo + self.rng.random_range(0.1..0.9) * (hi - lo);
        if col.integer {
            fmt_num(v.round())
        } else {
            fmt_num((v * 100.0).round() / 100.0)
        }
    }

    fn predicate(&mut self, alias: &str, col: &Col) -> String {
        let r = format!("{alias}.{}", col.name);
        match col.class.as_str() {
            "numeric" => {
                let a = self.number_in(col);
                match self.rng.random_range(0..4) {
                    0 => format!("{r} > {a}"),
                    1 => format!("{r} <= {a}"),
                    2 => {
                        let b = self.number_in(col);
                        let (x, y) = if a.parse::<f64>().unwrap_or(0.0) <= b.parse::<f64>().unwrap_or(0.0) {
                            (a, b)
                        } else {
                            (b, a)
                        };
                        format!("{r} >= {x} AND {r} <= {y}")
                    }
                    _ => format!("{r} <> {a}"),
                }
            }
            "date" => match &col.range {
                Some((Lit::Text(lo), Lit::Text(hi))) => {
                    let y0: i32 = lo.get(..4).and_then(|y| y.parse().ok()).unwrap_or(2020);
                    let y1: i32 = hi.get(..4).and_then(|y| y.parse().ok()).unwrap_or(y0);
                    let y = self.rng.random_range(y0..=y1.max(y0));
                    match self.rng.random_range(0..3) {
                        0 => format!("{r} >= '{y}-{:02}-01'", self.rng.random_range(1..=12)),
                        1 => format!("strftime('%Y', {r}) = '{y}'"),
                        _ => format!("{r} < '{y}-{:02}-15'", self.rng.random_range(1..=12)),
                    }
                }
                _ => format!("{r} IS NOT NULL"),
            },
            "enum-like" if !col.values.is_empty() => {
                let v: Vec<String> = col.values.iter().map(Lit::sql).collect();
                match self.rng.random_range(0..3) {
                    0 => format!("{r} = {}", v.choose(self.rng).expect("non-empty")),
                    1 => format!("{r} <> {}", v.choose(self.rng).expect("non-empty")),
                    _ => {
                        let k = self.rng.random_range(1..=v.len().min(3));
                        let picked: Vec<String> = v.choose_multiple(self.rng, k).cloned().collect();
                        format!("{r} IN ({})", picked.join(", "))
                    }
                }
            }
            "text" if !col.values.is_empty() => {
                let ex = match col.values.choose(self.rng).expect("non-empty") {
                    Lit::Text(s) => s.clone(),
                    Lit::Num(n) => fmt_num(*n),
                };
                let cut: String = ex.chars().take(self.rng.random_range(1..=ex.chars().count().clamp(1, 10))).collect();
                format!("{r} LIKE '{}%'", cut.replace('\'', "''"))
            }
            _ => format!("{r} IS NOT NULL"),
        }
    }

    fn filter_candidates(&self, occ: &[Occ]) -> Vec<(String, Col)> {
        self.cols_where(occ, |c| !c.is_key() || self.schema.joins.is_empty())
    }

    /// `WHERE ...` with 1 to 3 predicates, or empty.
    fn where_clause(&mut self, occ: &[Occ], required: bool) -> String {
        if !required && self.chance(0.2) {
            return String::new();
        }
        let cands = self.filter_candidates(occ);
        if cands.is_empty() {
            return String::new();
        }
        let n = self.rng.random_range(1..=3usize.min(cands.len()));
        let picked: Vec<(String, Col)> = cands.choose_multiple(self.rng, n).cloned().collect();
        let mut preds: Vec<String> = picked.iter().map(|(a, c)| self.predicate(a, c)).collect();
        if preds.len() >= 2 && self.chance(0.3) {
            let b = preds.pop().expect("two predicates");
            let a = preds.pop().expect("two predicates");
            preds.push(format!("({a} OR {b})"));
        }
        format!(" WHERE {}", preds.join(" AND "))
    }

    fn group_expr(&mut self, occ: &[Occ]) -> Option<(String, String)> {
        let (a, c) = self
            .pick_col(occ, Col::is_group)
            .or_else(|| self.pick_col(occ, |c| c.class == "text"))?;
        Some(if c.class == "date" {
            let part = ["%Y", "%m", "%Y-%m"].choose(self.rng).expect("non-empty");
            (format!("strftime('{part}', {a}.{})", c.name), format!("{}_period", c.name))
        } else {
            (format!("{a}.{}", c.name), c.name.clone())
        })
    }

    fn aggregate(&mut self, occ: &[Occ]) -> String {
        let measure = self.pick_col(occ, Col::is_measure);
        match (self.rng.random_range(0..6), measure) {
            (0, _) | (_, None) => "COUNT(*)".into(),
            (1, _) => match self.pick_col(occ, Col::is_key) {
                Some((a, c)) => format!("COUNT(DISTINCT {a}.{})", c.name),
                None => "COUNT(*)".into(),
            },
            (2, Some((a, c))) => format!("SUM({a}.{})", c.name),
            (3, Some((a, c))) => format!("AVG({a}.{})", c.name),
            (4, Some((a, c))) => format!("MAX({a}.{})", c.name),
            (_, Some((a, c))) => format!("MIN({a}.{})", c.name),
        }
    }

    fn projection(&mut self, occ: &[Occ], max: usize) -> Vec<String> {
        let mut cols = self.cols_where(occ, |_| true);
        cols.shuffle(self.rng);
        let n = self.rng.random_range(1..=max.min(cols.len()).max(1));
        cols.into_iter().take(n).map(|(a, c)| format!("{a}.{}", c.name)).collect()
    }

    fn tail(&mut self, order: &str) -> String {
        let mut t = String::new();
        if self.chance(0.6) {
            t.push_str(&format!(" ORDER BY {order}{}", if self.chance(0.5) { " DESC" } else { "" }));
        }
        if self.chance(0.5) {
            t.push_str(&format!(" LIMIT {}", [5, 10, 20, 25, 50, 100].choose(self.rng).expect("non-empty")));
        }
        t
    }

    fn parent_child(&mut self) -> Option<Join> {
        self.schema.joins.choose(self.rng).cloned()
    }

    pub fn query(&mut self) -> String {
        let kind = self.rng.random_range(0..10);
        let built = match kind {
            0 | 1 => self.aggregate_query(),
            2 => self.window_query(),
            3 => self.in_subquery(),
            4 => self.exists_query(),
            5 => self.scalar_subquery(),
            6 => self.cte_query(),
            7 => self.case_bucket(),
            8 => self.union_query(),
            _ => self.derived_query(),
        };
        built.unwrap_or_else(|| self.projection_query())
    }

    fn projection_query(&mut self) -> String {
        let (occ, conds) = self.walk_upto(3);
        let cols = self.projection(&occ, 4);
        let from = self.from_clause(&occ, &conds);
        let w = self.where_clause(&occ, true);
        let tail = self.tail(&cols[0].clone());
        format!("SELECT {} {from}{w}{tail}", cols.join(", "))
    }

    fn aggregate_query(&mut self) -> Option<String> {
        let (occ, conds) = self.walk_upto(4);
        let (g, name) = self.group_expr(&occ)?;
        let a1 = self.aggregate(&occ);
        let mut select = format!("{g} AS {name}, {a1} AS m1");
        if self.chance(0.4) {
            let a2 = self.aggregate(&occ);
            if a2 != a1 {
                select.push_str(&format!(", {a2} AS m2"));
            }
        }
        let from = self.from_clause(&occ, &conds);
        let w = self.where_clause(&occ, false);
        let having = if self.chance(0.35) {
            format!(" HAVING COUNT(*) > {}", self.rng.random_range(1..=5))
        } else {
            String::new()
        };
        let tail = self.tail("m1");
        Some(format!("SELECT {select} {from}{w} GROUP BY {g}{having}{tail}"))
    }

    fn window_query(&mut self) -> Option<String> {
        let (occ, conds) = self.walk_upto(3);
        let (part, _) = self.group_expr(&occ)?;
        let (ma, mc) = self.pick_col(&occ, Col::is_measure)?;
        let m = format!("{ma}.{}", mc.name);
        let func = match self.rng.random_range(0..6) {
            0 => "ROW_NUMBER()".to_string(),
            1 => "RANK()".to_string(),
            2 => "DENSE_RANK()".to_string(),
            3 => format!("SUM({m})"),
            4 => format!("AVG({m})"),
            _ => format!("LAG({m})"),
        };
        let dir = if self.chance(0.5) { " DESC" } else { "" };
        let cols = self.projection(&occ, 3);
        let from = self.from_clause(&occ, &conds);
        let w = self.where_clause(&occ, false);
        let inner = format!("SELECT {}, {m} AS measure, {func} OVER (PARTITION BY {part} ORDER BY {m}{dir}) AS w {from}{w}", cols.join(", "));
        if func.ends_with("RANK()") || func == "ROW_NUMBER()" {
            if self.chance(0.5) {
                return Some(format!("SELECT * FROM ({inner}) AS ranked WHERE ranked.w <= {}", self.rng.random_range(1..=5)));
            }
        }
        Some(inner)
    }

    fn in_subquery(&mut self) -> Option<String> {
        let j = self.parent_child()?;
        let (outer, inner, outer_col, inner_col) = if self.chance(0.5) {
            (j.parent, j.child, j.parent_col.clone(), j.child_col.clone())
        } else {
            (j.child, j.parent, j.child_col.clone(), j.parent_col.clone())
        };
        let o = [Occ { table: outer, alias: "t0".into() }];
        let i = [Occ { table: inner, alias: "t1".into() }];
        let cols = self.projection(&o, 3);
        let iw = self.where_clause(&i, true);
        let not = if self.chance(0.25) { "NOT " } else { "" };
        let ow = if self.chance(0.4) {
            let cands = self.filter_candidates(&o);
            match cands.choose(self.rng).cloned() {
                Some((a, c)) => format!(" AND {}", self.predicate(&a, &c)),
                None => String::new(),
            }
        } else {
            String::new()
        };
        let tail = self.tail(&cols[0].clone());
        Some(format!(
            "SELECT {} FROM {} t0 WHERE t0.{outer_col} {not}IN (SELECT t1.{inner_col} FROM {} t1{iw}){ow}{tail}",
            cols.join(", "),
            self.schema.tables[outer].name,
            self.schema.tables[inner].name
        ))
    }

    fn exists_query(&mut self) -> Option<String> {
        let j = self.parent_child()?;
        let o = [Occ { table: j.parent, alias: "t0".into() }];
        let i = [Occ { table: j.child, alias: "t1".into() }];
        let cols = self.projection(&o, 3);
        let extra = {
            let cands = self.filter_candidates(&i);
            match cands.choose(self.rng).cloned() {
                Some((a, c)) => format!(" AND {}", self.predicate(&a, &c)),
                None => String::new(),
            }
        };
        let not = if self.chance(0.3) { "NOT " } else { "" };
        let tail = self.tail(&cols[0].clone());
        Some(format!(
            "SELECT {} FROM {} t0 WHERE {not}EXISTS (SELECT 1 FROM {} t1 WHERE t1.{} = t0.{}{extra}){tail}",
            cols.join(", "),
            self.schema.tables[j.parent].name,
            self.schema.tables[j.child].name,
            j.child_col,
            j.parent_col
        ))
    }

    fn scalar_subquery(&mut self) -> Option<String> {
        let t = self.rng.random_range(0..self.schema.tables.len());
        let o = [Occ { table: t, alias: "t0".into() }];
        let (_, m) = self.pick_col(&o, Col::is_measure)?;
        let cols = self.projection(&o, 3);
        let agg = ["AVG", "MAX", "MIN"].choose(self.rng).expect("non-empty");
        let cmp = if *agg == "MAX" { ">=" } else if *agg == "MIN" { "<=" } else { [">", "<"].choose(self.rng).expect("non-empty") };
        let corr = match self.pick_col(&o, Col::is_group) {
            Some((_, g)) if g.class == "enum-like" && self.chance(0.5) => format!(" WHERE t1.{0} = t0.{0}", g.name),
            _ => String::new(),
        };
        let table = &self.schema.tables[t].name;
        let tail = self.tail(&format!("t0.{}", m.name));
        Some(format!(
            "SELECT {}, t0.{m} FROM {table} t0 WHERE t0.{m} {cmp} (SELECT {agg}(t1.{m}) FROM {table} t1{corr}){tail}",
            cols.join(", "),
            m = m.name
        ))
    }

    fn cte_query(&mut self) -> Option<String> {
        let j = self.parent_child()?;
        let c = [Occ { table: j.child, alias: "t1".into() }];
        let agg = self.aggregate(&c);
        let w = self.where_clause(&c, false);
        let p = [Occ { table: j.parent, alias: "t0".into() }];
        let cols = self.projection(&p, 2);
        let having = if self.chance(0.5) { format!(" WHERE s.total > {}", self.rng.random_range(1..=20)) } else { String::new() };
        let name = ["stats", "agg", "summary", "per_key"].choose(self.rng).expect("non-empty");
        let tail = self.tail("s.total");
        Some(
            format!(
                "WITH s AS (SELECT t1.{cc} AS key, {agg} AS total FROM {child} t1{w} GROUP BY t1.{cc}) \
                 SELECT {cols}, s.total FROM {parent} t0 JOIN s ON s.key = t0.{pc}{having}{tail}",
                cc = j.child_col,
                child = self.schema.tables[j.child].name,
                cols = cols.join(", "),
                parent = self.schema.tables[j.parent].name,
                pc = j.parent_col,
            )
            .replace("WITH s AS", &format!("WITH {name} AS"))
            .replace("JOIN s ON s.", &format!("JOIN {name} s ON s.")),
        )
    }

    fn case_bucket(&mut self) -> Option<String> {
        let (occ, conds) = self.walk_upto(3);
        let (a, m) = self.pick_col(&occ, Col::is_measure)?;
        let x = self.number_in(&m);
        let y = self.number_in(&m);
        let (lo, hi) = if x.parse::<f64>().ok()? <= y.parse::<f64>().ok()? { (x, y) } else { (y, x) };
        let r = format!("{a}.{}", m.name);
        let from = self.from_clause(&occ, &conds);
        let w = self.where_clause(&occ, false);
        let agg = self.aggregate(&occ);
        Some(format!(
            "SELECT CASE WHEN {r} < {lo} THEN 'low' WHEN {r} < {hi} THEN 'mid' ELSE 'high' END AS bucket, {agg} AS m1 {from}{w} GROUP BY bucket ORDER BY bucket"
        ))
    }

    fn union_query(&mut self) -> Option<String> {
        let t = self.rng.random_range(0..self.schema.tables.len());
        let o = [Occ { table: t, alias: "t0".into() }];
        let cols = self.projection(&o, 2);
        let w1 = self.where_clause(&o, true);
        let w2 = self.where_clause(&o, true);
        if w1.is_empty() || w1 == w2 {
            return None;
        }
        let op = ["UNION", "UNION ALL", "INTERSECT", "EXCEPT"].choose(self.rng).expect("non-empty");
        let table = &self.schema.tables[t].name;
        Some(format!("SELECT {c} FROM {table} t0{w1} {op} SELECT {c} FROM {table} t0{w2}", c = cols.join(", ")))
    }

    fn derived_query(&mut self) -> Option<String> {
        let (occ, conds) = self.walk_upto(3);
        let (g, _) = self.group_expr(&occ)?;
        let (a, m) = self.pick_col(&occ, Col::is_measure)?;
        let from = self.from_clause(&occ, &conds);
        let w = self.where_clause(&occ, false);
        let agg = ["AVG", "SUM", "MAX"].choose(self.rng).expect("non-empty");
        let tail = self.tail("cnt");
        Some(format!(
            "SELECT d.g, COUNT(*) AS cnt, {agg}(d.m) AS agg_m FROM (SELECT {g} AS g, {a}.{} AS m {from}{w}) AS d GROUP BY d.g{tail}",
            m.name
        ))
    }
}
