//! Synthetic sales transactions with the thirteen-column retail schema.
//!
//! Totals are consistent by construction: `Total Sales = Price per Unit *
//! Units Sold` and `Operating Profit = Total Sales * Operating Margin`
//! (rounded to the cent).

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ColumnType, Schema, Table, Value};

/// States used by the balanced 1000-row protocol.
pub const FOCUS_STATES: [&str; 10] = [
    "New York",
    "Texas",
    "California",
    "Illinois",
    "Arizona",
    "Alaska",
    "Colorado",
    "Washington",
    "Florida",
    "Minnesota",
];

struct StateProfile {
    name: &'static str,
    region: &'static str,
    demand: f64,
    cities: &'static [(&'static str, &'static [&'static str])],
}

const STATES: &[StateProfile] = &[
    StateProfile {
        name: "New York",
        region: "Northeast",
        demand: 1.5,
        cities: &[("New York", &["Foot Locker", "Amazon"]), ("Albany", &["Foot Locker"])],
    },
    StateProfile {
        name: "Texas",
        region: "South",
        demand: 1.3,
        cities: &[("Houston", &["Walmart", "Sports Direct"]), ("Dallas", &["Walmart"])],
    },
    StateProfile {
        name: "California",
        region: "West",
        demand: 1.6,
        cities: &[("Los Angeles", &["Kohl's"]), ("San Francisco", &["West Gear", "Foot Locker"])],
    },
    StateProfile {
        name: "Illinois",
        region: "Midwest",
        demand: 1.1,
        cities: &[("Chicago", &["Foot Locker", "West Gear"])],
    },
    StateProfile {
        name: "Arizona",
        region: "West",
        demand: 0.9,
        cities: &[("Phoenix", &["Kohl's", "Sports Direct"])],
    },
    StateProfile {
        name: "Alaska",
        region: "West",
        demand: 0.35,
        cities: &[("Anchorage", &["Walmart", "West Gear"])],
    },
    StateProfile {
        name: "Colorado",
        region: "West",
        demand: 0.8,
        cities: &[("Denver", &["Foot Locker", "Amazon"])],
    },
    StateProfile {
        name: "Washington",
        region: "West",
        demand: 0.9,
        cities: &[("Seattle", &["Amazon", "Kohl's"])],
    },
    StateProfile {
        name: "Florida",
        region: "Southeast",
        demand: 1.2,
        cities: &[("Miami", &["Walmart", "Sports Direct"]), ("Orlando", &["Walmart"])],
    },
    StateProfile {
        name: "Minnesota",
        region: "Midwest",
        demand: 0.7,
        cities: &[("Minneapolis", &["Kohl's", "West Gear"])],
    },
    StateProfile {
        name: "Nevada",
        region: "West",
        demand: 0.8,
        cities: &[("Las Vegas", &["Amazon"])],
    },
    StateProfile {
        name: "Georgia",
        region: "Southeast",
        demand: 0.8,
        cities: &[("Atlanta", &["Foot Locker"])],
    },
    StateProfile {
        name: "Ohio",
        region: "Midwest",
        demand: 0.8,
        cities: &[("Columbus", &["Walmart"])],
    },
    StateProfile {
        name: "Pennsylvania",
        region: "Northeast",
        demand: 0.8,
        cities: &[("Philadelphia", &["Sports Direct"])],
    },
];

const PRODUCTS: [(&str, i64); 6] = [
    ("Men's Street Footwear", 50),
    ("Men's Athletic Footwear", 45),
    ("Women's Street Footwear", 40),
    ("Women's Athletic Footwear", 42),
    ("Men's Apparel", 48),
    ("Women's Apparel", 52),
];

fn retailer_id(retailer: &str) -> i64 {
    match retailer {
        "Walmart" => 1128299,
        "West Gear" => 1128299,
        "Foot Locker" => 1185732,
        "Amazon" => 1185732,
        "Kohl's" => 1189833,
        _ => 1197831,
    }
}

/// The retail sales schema, in file order.
pub fn sales_schema() -> Schema {
    use ColumnType::*;
    Schema::from_pairs([
        ("Retailer", Text),
        ("Retailer ID", Integer),
        ("Invoice Date", Date),
        ("Region", Text),
        ("State", Text),
        ("City", Text),
        ("Product", Text),
        ("Price per Unit", Money),
        ("Units Sold", Integer),
        ("Total Sales", Money),
        ("Operating Profit", Money),
        ("Operating Margin", Percent),
        ("Sales Method", Text),
    ])
    .expect("static schema is valid")
}

/// `cents * factor`, rounded half away from zero.
pub(crate) fn scale_cents(cents: i64, factor: f64) -> i64 {
    (cents as f64 * factor).round() as i64
}

/// Seeded synthetic transactions for calendar year 2021. When `n_rows >= 10`
/// every focus state appears at least once.
pub fn synth_sales(seed: u64, n_rows: usize) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let methods = ["In-store", "Outlet", "Online"];
    let mut rows: Vec<(NaiveDate, Vec<Value>)> = Vec::with_capacity(n_rows);

    for i in 0..n_rows {
        let state = if i < FOCUS_STATES.len() && n_rows >= FOCUS_STATES.len() {
            &STATES[i]
        } else if rng.gen_bool(0.9) {
            &STATES[rng.gen_range(0..FOCUS_STATES.len())]
        } else {
            &STATES[rng.gen_range(FOCUS_STATES.len()..STATES.len())]
        };
        let (city, retailers) = state.cities[rng.gen_range(0..state.cities.len())];
        let retailer = retailers[rng.gen_range(0..retailers.len())];
        let date = start + Duration::days(rng.gen_range(0..365));
        let (product, base_price) = PRODUCTS[rng.gen_range(0..PRODUCTS.len())];
        let method = match retailer {
            "Amazon" => "Online",
            "Kohl's" if state.name != "Arizona" => methods[rng.gen_range(0..2)],
            _ => methods[rng.gen_range(0..3)],
        };
        let price = (base_price + rng.gen_range(-15..=25) + if method == "Online" { 5 } else { 0 })
            .clamp(20, 110);
        let units = ((rng.gen_range(1000..=9000) as f64) * state.demand).round() as i64;
        let units = units.max(300);
        let margin_base: i64 = match method {
            "Online" => 45,
            "Outlet" => 38,
            _ => 33,
        };
        let margin = (margin_base + rng.gen_range(-12..=12)).clamp(10, 76) as f64 / 100.0;
        let total = price * 100 * units;
        let profit = scale_cents(total, margin);

        rows.push((
            date,
            vec![
                Value::Text(retailer.to_string()),
                Value::Integer(retailer_id(retailer)),
                Value::Date(date),
                Value::Text(state.region.to_string()),
                Value::Text(state.name.to_string()),
                Value::Text(city.to_string()),
                Value::Text(product.to_string()),
                Value::Money(price * 100),
                Value::Integer(units),
                Value::Money(total),
                Value::Money(profit),
                Value::Percent(margin),
                Value::Text(method.to_string()),
            ],
        ));
    }
    rows.sort_by_key(|(d, _)| *d);
    Table::new(sales_schema(), rows.into_iter().map(|(_, r)| r).collect())
        .expect("generated rows match the schema")
}
