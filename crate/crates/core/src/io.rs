//! Flat-file formats. Every number in a CSV goes through [`sig12`], so output
//! bytes depend only on the values, never on locale or platform formatting.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::global::SweepRow;
use crate::scalar::Scalar;
use crate::scenario::TravelScenario;

pub const SCENARIO_COLUMNS: [&str; 7] = ["label", "u0", "b_sm", "gamma_min", "gamma_max", "x_low", "x_high"];

pub const SWEEP_COLUMNS: [&str; 11] = [
    "theta_name",
    "theta_value",
    "gamma_star_numeric",
    "f_star_numeric",
    "gamma_star_taylor1",
    "f_star_taylor1",
    "f_star_taylor2",
    "mu_low",
    "mu_high",
    "active",
    "mismatch_loss",
];

/// `printf("%.12g")`: twelve significant digits, trailing zeros dropped,
/// exponent form below `1e-4` and from `1e12`.
///
/// ```
/// use cpt_sense::io::sig12;
/// assert_eq!(sig12(0.1 + 0.2), "0.3");
/// assert_eq!(sig12(-2.8412345678901), "-2.84123456789");
/// assert_eq!(sig12(1.5e-7), "1.5e-07");
/// assert_eq!(sig12(123456789012345.0), "1.23456789012e+14");
/// ```
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let fixed = format!("{x:.*}", (11 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn read_scenarios_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<TravelScenario<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(SCENARIO_COLUMNS) {
        return Err(Error::Config(format!(
            "scenario CSV header must be `{}`, got `{}`",
            SCENARIO_COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_scenarios_json<T: Scalar, R: Read>(reader: R) -> Result<Vec<TravelScenario<T>>> {
    Ok(serde_json::from_reader(reader)?)
}

/// Read scenarios from `.json` or CSV (any other extension).
pub fn load_scenarios<T: Scalar>(path: &Path) -> Result<Vec<TravelScenario<T>>> {
    let file = BufReader::new(File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => read_scenarios_json(file),
        _ => read_scenarios_csv(file),
    }
}

/// Write a header and pre-formatted rows.
pub fn write_table<W: Write, H: AsRef<[u8]>>(writer: W, header: &[H], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenarios_csv<T: Scalar, W: Write>(writer: W, scenarios: &[TravelScenario<T>]) -> Result<()> {
    let rows: Vec<Vec<String>> = scenarios
        .iter()
        .map(|s| {
            let mut row = vec![s.label.clone()];
            row.extend([s.u0, s.b_sm, s.gamma_min, s.gamma_max, s.x_low, s.x_high].map(|v| sig12(v.as_f64())));
            row
        })
        .collect();
    write_table(writer, &SCENARIO_COLUMNS, &rows)
}

pub fn sweep_record<T: Scalar>(row: &SweepRow<T>) -> Vec<String> {
    let num = |v: T| sig12(v.as_f64());
    vec![
        row.theta_name.name().to_string(),
        num(row.theta_value),
        num(row.gamma_star_numeric),
        num(row.f_star_numeric),
        num(row.gamma_star_taylor1),
        num(row.f_star_taylor1),
        num(row.f_star_taylor2),
        num(row.mu_low),
        num(row.mu_high),
        row.active.map_or("error", |a| a.name()).to_string(),
        num(row.mismatch_loss),
    ]
}

pub fn write_sweep_csv<T: Scalar, W: Write>(writer: W, rows: &[SweepRow<T>]) -> Result<()> {
    let records: Vec<Vec<String>> = rows.iter().map(sweep_record).collect();
    write_table(writer, &SWEEP_COLUMNS, &records)
}
