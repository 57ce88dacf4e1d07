//! A small retail database and a deterministic stand-in model, for tests,
//! demos and offline runs.

mod model;
mod mutate;
mod querygen;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::{params, Connection};

pub use model::{ToyMode, ToyModel};

use crate::schema::{ingest_ddl, refine_enum_classes, DatabaseSchema, EnumDetection, SchemaError};

pub const TOY_DDL: &str = "
CREATE TABLE region (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  country TEXT NOT NULL
);
CREATE TABLE customers (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  segment TEXT NOT NULL,
  region_id INTEGER NOT NULL REFERENCES region(id),
  signup_date DATE NOT NULL,
  credit_limit REAL NOT NULL
);
CREATE TABLE products (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  category TEXT NOT NULL,
  price REAL NOT NULL,
  stock INTEGER NOT NULL
);
CREATE TABLE orders (
  id INTEGER PRIMARY KEY,
  customer_id INTEGER NOT NULL REFERENCES customers(id),
  order_date DATE NOT NULL,
  status TEXT NOT NULL,
  total REAL NOT NULL
);
CREATE TABLE order_items (
  id INTEGER PRIMARY KEY,
  order_id INTEGER NOT NULL REFERENCES orders(id),
  product_id INTEGER NOT NULL REFERENCES products(id),
  quantity INTEGER NOT NULL,
  unit_price REAL NOT NULL,
  discount REAL NOT NULL
);
CREATE TABLE payments (
  id INTEGER PRIMARY KEY,
  order_id INTEGER NOT NULL REFERENCES orders(id),
  method TEXT NOT NULL,
  amount REAL NOT NULL,
  paid_at DATE NOT NULL
);
";

const REGIONS: [&str; 8] = ["north", "south", "east", "west", "central", "coastal", "mountain", "islands"];
const COUNTRIES: [&str; 3] = ["US", "CA", "MX"];
const SEGMENTS: [&str; 3] = ["consumer", "corporate", "home_office"];
const CATEGORIES: [&str; 6] = ["books", "garden", "toys", "kitchen", "sports", "office"];
const STATUSES: [&str; 5] = ["pending", "paid", "shipped", "cancelled", "returned"];
const METHODS: [&str; 4] = ["card", "cash", "transfer", "voucher"];
const DISCOUNTS: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

fn date(rng: &mut ChaCha8Rng, first_year: i32, years: i32) -> String {
    format!(
        "{}-{:02}-{:02}",
        first_year + rng.random_range(0..years),
        rng.random_range(1..=12),
        rng.random_range(1..=28)
    )
}

fn money(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 100.0).round() / 100.0
}

/// Creates the retail database at `path` (which must not exist yet) and
/// returns its schema with enum-like columns detected. Content depends only
/// on `seed`.
pub fn build_toy_database(path: &Path, seed: u64) -> Result<DatabaseSchema, SchemaError> {
    let io = |e: std::io::Error| SchemaError::Io { path: path.display().to_string(), message: e.to_string() };
    if path.exists() {
        return Err(io(std::io::Error::new(std::io::ErrorKind::AlreadyExists, "refusing to overwrite")));
    }
    let mut conn = Connection::open(path)?;
    conn.execute_batch(TOY_DDL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx = conn.transaction()?;
    for (i, name) in REGIONS.iter().enumerate() {
        tx.execute("INSERT INTO region VALUES (?1, ?2, ?3)", params![i as i64 + 1, name, COUNTRIES[i % 3]])?;
    }
    for i in 1..=300i64 {
        tx.execute(
            "INSERT INTO customers VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                i,
                format!("customer_{i:03}"),
                SEGMENTS[rng.random_range(0..SEGMENTS.len())],
                rng.random_range(1..=REGIONS.len() as i64),
                date(&mut rng, 2019, 5),
                money(&mut rng, 500.0, 20_000.0)
            ],
        )?;
    }
    for i in 1..=120i64 {
        tx.execute(
            "INSERT INTO products VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                i,
                format!("product_{i:03}"),
                CATEGORIES[rng.random_range(0..CATEGORIES.len())],
                money(&mut rng, 1.0, 500.0),
                rng.random_range(0..1000i64)
            ],
        )?;
    }
    for i in 1..=1500i64 {
        tx.execute(
            "INSERT INTO orders VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                i,
                rng.random_range(1..=300i64),
                date(&mut rng, 2020, 5),
                STATUSES[rng.random_range(0..STATUSES.len())],
                money(&mut rng, 5.0, 3_000.0)
            ],
        )?;
    }
    for i in 1..=4000i64 {
        tx.execute(
            "INSERT INTO order_items VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                i,
                rng.random_range(1..=1500i64),
                rng.random_range(1..=120i64),
                rng.random_range(1..=10i64),
                money(&mut rng, 1.0, 500.0),
                DISCOUNTS[rng.random_range(0..DISCOUNTS.len())]
            ],
        )?;
    }
    for i in 1..=1400i64 {
        tx.execute(
            "INSERT INTO payments VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                i,
                rng.random_range(1..=1500i64),
                METHODS[rng.random_range(0..METHODS.len())],
                money(&mut rng, 5.0, 3_000.0),
                date(&mut rng, 2020, 5)
            ],
        )?;
    }
    tx.commit()?;
    let mut db = ingest_ddl("toy", TOY_DDL)?;
    refine_enum_classes(&mut db, &conn, &EnumDetection::default())?;
    db.data_path = Some(path.to_path_buf());
    Ok(db)
}
