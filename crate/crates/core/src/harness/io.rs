//! Candidate input files: JSONL `{"id": .., "score": ..}` or CSV `id,score`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::candidate::{check_score, CandidateRecord};
use crate::error::{Error, Result};

/// Reads candidates from `path`. `.csv` files are parsed as CSV with a header
/// row; anything else as JSON lines.
pub fn read_records(path: &Path) -> Result<Vec<CandidateRecord>> {
    let file = File::open(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_csv(file)
    } else {
        read_jsonl(BufReader::new(file))
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<CandidateRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CandidateRecord = serde_json::from_str(&line)
            .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)))?;
        records.push(record);
    }
    validate(records)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CandidateRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let records = rdr.deserialize().collect::<std::result::Result<Vec<CandidateRecord>, _>>()?;
    validate(records)
}

fn validate(records: Vec<CandidateRecord>) -> Result<Vec<CandidateRecord>> {
    if records.is_empty() {
        return Err(Error::invalid("input contains no candidates"));
    }
    let mut ids = HashSet::new();
    for r in &records {
        check_score(r.score).map_err(|e| Error::invalid(format!("candidate {:?}: {e}", r.id)))?;
        if !ids.insert(r.id.as_str()) {
            return Err(Error::invalid(format!("duplicate candidate id {:?}", r.id)));
        }
    }
    Ok(records)
}
