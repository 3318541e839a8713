use std::io::{Read, Write};
use std::path::Path;

use super::{generate_span, Covariates, DgpConfig, Education, Exposures, IndividualRecord, PotentialOutcomes, SimError};
use crate::exec::Execution;
use crate::estimands::Dataset;

pub const OBSERVED_COLUMNS: [&str; 16] = [
    "id", "age", "urban", "east", "edu", "allergy", "smoke", "female", "bweight", "caesar", "a1", "a2", "a3", "a4",
    "bfdur", "y",
];

pub const POTENTIAL_COLUMNS: [&str; 11] = [
    "y_a1_0",
    "y_a1_1",
    "y_a2_0",
    "y_a2_1",
    "y_a3_0",
    "y_a1_0_a3_1",
    "y_a1_1_a3_1",
    "y_a2_1_a3_1",
    "y_a4_1",
    "a2_offer",
    "u",
];

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Shortest text that parses back to the same `f64`.
fn real(v: f64) -> String {
    format!("{v}")
}

fn row(r: &IndividualRecord, include_potentials: bool) -> Vec<String> {
    let c = &r.covariates;
    let e = &r.exposures;
    let mut out = vec![
        r.id.to_string(),
        real(c.age),
        flag(c.urban),
        flag(c.east),
        c.education.code().to_string(),
        flag(c.allergy),
        flag(c.smoke),
        flag(c.female),
        real(c.bweight),
        flag(c.caesar),
        flag(e.a1),
        flag(e.a2),
        flag(e.a3),
        flag(e.a4),
        real(e.bfdur),
        real(r.y),
    ];
    if include_potentials {
        let p = &r.potentials;
        out.extend([
            real(p.y_a1_0),
            real(p.y_a1_1),
            real(p.y_a2_0),
            real(p.y_a2_1),
            real(p.y_a3_0),
            real(p.y_a1_0_a3_1),
            real(p.y_a1_1_a3_1),
            real(p.y_a2_1_a3_1),
            real(p.y_a4_1),
            flag(p.a2_offer),
            real(r.u),
        ]);
    }
    out
}

fn header(include_potentials: bool) -> Vec<&'static str> {
    let mut header: Vec<&str> = OBSERVED_COLUMNS.to_vec();
    if include_potentials {
        header.extend(POTENTIAL_COLUMNS);
    }
    header
}

pub fn write_records<W: Write>(records: &[IndividualRecord], out: W, include_potentials: bool) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(include_potentials)).map_err(io_err)?;
    for r in records {
        w.write_record(row(r, include_potentials)).map_err(io_err)?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

/// Generates `config.n` records directly into CSV, holding one block of
/// records at a time. The output equals `write_records(generate(..))`.
pub fn stream_records<W: Write>(config: &DgpConfig, exec: Execution, out: W, include_potentials: bool) -> Result<(), SimError> {
    config.validate()?;
    const BLOCK: usize = 1 << 16;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(include_potentials)).map_err(io_err)?;
    let mut start = 0;
    while start < config.n {
        let end = (start + BLOCK).min(config.n);
        let parts = exec.map_chunks(end - start, 4096, |s, e| generate_span(config, (start + s) as u64, (start + e) as u64));
        for r in parts.iter().flatten() {
            w.write_record(row(r, include_potentials)).map_err(io_err)?;
        }
        start = end;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

pub fn export(records: &[IndividualRecord], path: &Path, include_potentials: bool) -> Result<(), SimError> {
    let file = std::fs::File::create(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    write_records(records, std::io::BufWriter::new(file), include_potentials)
}

/// Reads any numeric CSV into columns keyed by header name.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset, SimError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers().map_err(io_err)?.iter().map(|h| h.trim().to_string()).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                SimError::Parse(format!("row {}, column `{}`: `{field}` is not a number", line + 1, header[j]))
            })?;
            cols[j].push(v);
        }
    }
    let n = cols.first().map_or(0, |c| c.len());
    let mut data = Dataset::new(n);
    for (name, col) in header.iter().zip(cols) {
        data.insert(name, col);
    }
    Ok(data)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, SimError> {
    let file = std::fs::File::open(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(file))
}

/// Rebuilds full records from a CSV written with potentials.
pub fn read_records<R: Read>(input: R) -> Result<Vec<IndividualRecord>, SimError> {
    let data = read_dataset(input)?;
    records_from_dataset(&data)
}

pub fn import(path: &Path) -> Result<Vec<IndividualRecord>, SimError> {
    records_from_dataset(&load_dataset(path)?)
}

pub fn records_from_dataset(data: &Dataset) -> Result<Vec<IndividualRecord>, SimError> {
    let get = |name: &str| data.column(name).map_err(|_| SimError::Parse(format!("missing column `{name}`")));
    let mut cols = std::collections::HashMap::new();
    for name in OBSERVED_COLUMNS.iter().chain(POTENTIAL_COLUMNS.iter()) {
        cols.insert(*name, get(name)?);
    }
    let b = |name: &str, i: usize| cols[name][i] != 0.0;
    let f = |name: &str, i: usize| cols[name][i];
    (0..data.rows())
        .map(|i| {
            let education = Education::from_code(f("edu", i) as u8)
                .filter(|_| f("edu", i).fract() == 0.0)
                .ok_or_else(|| SimError::Parse(format!("row {}: invalid education code", i + 1)))?;
            Ok(IndividualRecord {
                id: f("id", i) as u64,
                covariates: Covariates {
                    age: f("age", i),
                    urban: b("urban", i),
                    east: b("east", i),
                    education,
                    allergy: b("allergy", i),
                    smoke: b("smoke", i),
                    female: b("female", i),
                    bweight: f("bweight", i),
                    caesar: b("caesar", i),
                },
                exposures: Exposures {
                    a1: b("a1", i),
                    a2: b("a2", i),
                    a3: b("a3", i),
                    a4: b("a4", i),
                    bfdur: f("bfdur", i),
                },
                y: f("y", i),
                potentials: PotentialOutcomes {
                    y_a1_0: f("y_a1_0", i),
                    y_a1_1: f("y_a1_1", i),
                    y_a2_0: f("y_a2_0", i),
                    y_a2_1: f("y_a2_1", i),
                    y_a3_0: f("y_a3_0", i),
                    y_a1_0_a3_1: f("y_a1_0_a3_1", i),
                    y_a1_1_a3_1: f("y_a1_1_a3_1", i),
                    y_a2_1_a3_1: f("y_a2_1_a3_1", i),
                    y_a4_1: f("y_a4_1", i),
                    a2_offer: b("a2_offer", i),
                },
                u: f("u", i),
            })
        })
        .collect()
}

/// Column view of records, as an analyst would load it.
pub fn records_to_dataset(records: &[IndividualRecord], include_potentials: bool) -> Dataset {
    let mut data = Dataset::new(records.len());
    let mut add = |name: &str, f: &dyn Fn(&IndividualRecord) -> f64| {
        data.insert(name, records.iter().map(f).collect());
    };
    let fl = |b: bool| f64::from(u8::from(b));
    add("id", &|r| r.id as f64);
    add("age", &|r| r.covariates.age);
    add("urban", &|r| fl(r.covariates.urban));
    add("east", &|r| fl(r.covariates.east));
    add("edu", &|r| f64::from(r.covariates.education.code()));
    add("allergy", &|r| fl(r.covariates.allergy));
    add("smoke", &|r| fl(r.covariates.smoke));
    add("female", &|r| fl(r.covariates.female));
    add("bweight", &|r| r.covariates.bweight);
    add("caesar", &|r| fl(r.covariates.caesar));
    add("a1", &|r| fl(r.exposures.a1));
    add("a2", &|r| fl(r.exposures.a2));
    add("a3", &|r| fl(r.exposures.a3));
    add("a4", &|r| fl(r.exposures.a4));
    add("bfdur", &|r| r.exposures.bfdur);
    add("y", &|r| r.y);
    if include_potentials {
        add("y_a1_0", &|r| r.potentials.y_a1_0);
        add("y_a1_1", &|r| r.potentials.y_a1_1);
        add("y_a2_0", &|r| r.potentials.y_a2_0);
        add("y_a2_1", &|r| r.potentials.y_a2_1);
        add("y_a3_0", &|r| r.potentials.y_a3_0);
        add("y_a1_0_a3_1", &|r| r.potentials.y_a1_0_a3_1);
        add("y_a1_1_a3_1", &|r| r.potentials.y_a1_1_a3_1);
        add("y_a2_1_a3_1", &|r| r.potentials.y_a2_1_a3_1);
        add("y_a4_1", &|r| r.potentials.y_a4_1);
        add("a2_offer", &|r| fl(r.potentials.a2_offer));
        add("u", &|r| r.u);
    }
    data
}

fn io_err(e: csv::Error) -> SimError {
    SimError::Io(e.to_string())
}
