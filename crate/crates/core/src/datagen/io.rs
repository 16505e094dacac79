//! CSV files of a release.
//!
//! | file | columns |
//! |---|---|
//! | `deidentified_transactions.csv` | `NUMERO_DE_ORDEM,ANOMES,COD_NCM,PAIS_DE_ORIGEM,PESO_LIQUIDO,VMLE_DOLAR` |
//! | `importers.csv` | `CNPJ,EMPRESA,MUNICIPIO,UF` |
//! | `summary_by_city.csv` | `CO_ANO,CO_MES,SH4,CO_PAIS,SG_UF_MUN,CO_MUN,KG_LIQUIDO,VL_FOB` |
//! | `summary_by_state.csv` | `CO_ANO,CO_MES,CO_NCM,CO_PAIS,SG_UF_NCM,KG_LIQUIDO,VL_FOB` |
//! | `ground_truth.csv` | microdata columns, then `CNPJ,INCLUSAO` |
//!
//! Weights are in kg, values in USD, both plain decimals.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{
    CitySummary, DeidentifiedTransaction, ImporterRecord, InclusionClass, MicroTransaction, Ncm,
    SanitizedRelease, StateSummary,
};
use crate::quantity::{Quantity, Scale};

pub const DEIDENTIFIED_FILE: &str = "deidentified_transactions.csv";
pub const IMPORTERS_FILE: &str = "importers.csv";
pub const CITY_FILE: &str = "summary_by_city.csv";
pub const STATE_FILE: &str = "summary_by_state.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

const DEID_HEADER: [&str; 6] = [
    "NUMERO_DE_ORDEM",
    "ANOMES",
    "COD_NCM",
    "PAIS_DE_ORIGEM",
    "PESO_LIQUIDO",
    "VMLE_DOLAR",
];
const IMPORTERS_HEADER: [&str; 4] = ["CNPJ", "EMPRESA", "MUNICIPIO", "UF"];
const CITY_HEADER: [&str; 8] = [
    "CO_ANO", "CO_MES", "SH4", "CO_PAIS", "SG_UF_MUN", "CO_MUN", "KG_LIQUIDO", "VL_FOB",
];
const STATE_HEADER: [&str; 7] = [
    "CO_ANO", "CO_MES", "CO_NCM", "CO_PAIS", "SG_UF_NCM", "KG_LIQUIDO", "VL_FOB",
];

#[derive(Debug, Error)]
pub enum ReleaseIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: unexpected header, expected {expected}")]
    Header { path: PathBuf, expected: String },
    #[error("{path} row {row}: {reason}")]
    Row {
        path: PathBuf,
        row: usize,
        reason: String,
    },
}

fn open(path: &Path) -> Result<csv::Reader<BufReader<File>>, ReleaseIoError> {
    let file = File::open(path).map_err(|source| ReleaseIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Reader::from_reader(BufReader::new(file)))
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ReleaseIoError> {
    let file = File::create(path).map_err(|source| ReleaseIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Reads every record of `path`, checking the header, and hands each one to
/// `parse` together with its 1-based line number.
fn read_rows<T>(
    path: &Path,
    header: &[&str],
    mut parse: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Result<Vec<T>, ReleaseIoError> {
    let csv_err = |source| ReleaseIoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = open(path)?;
    let found = rdr.headers().map_err(csv_err)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(ReleaseIoError::Header {
            path: path.to_path_buf(),
            expected: header.join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        out.push(parse(&rec).map_err(|reason| ReleaseIoError::Row {
            path: path.to_path_buf(),
            row: i + 2,
            reason,
        })?);
    }
    Ok(out)
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), ReleaseIoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let csv_err = |source| ReleaseIoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = create(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ReleaseIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn quantity(field: &str, scale: Scale) -> Result<Quantity, String> {
    Quantity::parse(field, scale).map_err(|e| e.to_string())
}

fn ncm(field: &str) -> Result<Ncm, String> {
    Ncm::new(field).ok_or_else(|| format!("invalid NCM code {field:?}"))
}

fn year_month(year: &str, month: &str) -> Result<String, String> {
    let ok = year.len() == 4
        && (1..=2).contains(&month.len())
        && year.bytes().chain(month.bytes()).all(|b| b.is_ascii_digit());
    if !ok {
        return Err(format!("invalid year/month {year:?}/{month:?}"));
    }
    Ok(format!("{year}{month:0>2}"))
}

fn anomes(field: &str) -> Result<String, String> {
    if field.len() != 6 || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("invalid ANOMES {field:?}"));
    }
    Ok(field.to_string())
}

fn split_year_month(ym: &str) -> (&str, &str) {
    let (year, month) = ym.split_at(4);
    (year, month.trim_start_matches('0'))
}

fn deid_row(rec: &csv::StringRecord) -> Result<DeidentifiedTransaction, String> {
    Ok(DeidentifiedTransaction {
        order: rec[0].to_string(),
        year_month: anomes(&rec[1])?,
        ncm: ncm(&rec[2])?,
        country: rec[3].to_string(),
        weight: quantity(&rec[4], Scale::WEIGHT)?,
        value: quantity(&rec[5], Scale::VALUE)?,
    })
}

fn deid_fields(t: &DeidentifiedTransaction) -> Vec<String> {
    vec![
        t.order.clone(),
        t.year_month.clone(),
        t.ncm.to_string(),
        t.country.clone(),
        t.weight.display(Scale::WEIGHT).to_string(),
        t.value.display(Scale::VALUE).to_string(),
    ]
}

/// Writes the four public files into `dir`, which must exist.
pub fn write_release(dir: &Path, release: &SanitizedRelease) -> Result<(), ReleaseIoError> {
    write_rows(
        &dir.join(DEIDENTIFIED_FILE),
        &DEID_HEADER,
        release.deidentified.iter().map(deid_fields),
    )?;
    write_rows(
        &dir.join(IMPORTERS_FILE),
        &IMPORTERS_HEADER,
        release
            .importers
            .iter()
            .map(|i| [&i.id, &i.name, &i.city, &i.state]),
    )?;
    write_rows(
        &dir.join(CITY_FILE),
        &CITY_HEADER,
        release.by_city.iter().map(|c| {
            let (year, month) = split_year_month(&c.year_month);
            vec![
                year.to_string(),
                month.to_string(),
                c.sh4.clone(),
                c.country.clone(),
                c.state.clone(),
                c.city.clone(),
                c.weight.display(Scale::WEIGHT).to_string(),
                c.value.display(Scale::VALUE).to_string(),
            ]
        }),
    )?;
    write_rows(
        &dir.join(STATE_FILE),
        &STATE_HEADER,
        release.by_state.iter().map(|s| {
            let (year, month) = split_year_month(&s.year_month);
            vec![
                year.to_string(),
                month.to_string(),
                s.ncm.to_string(),
                s.country.clone(),
                s.state.clone(),
                s.weight.display(Scale::WEIGHT).to_string(),
                s.value.display(Scale::VALUE).to_string(),
            ]
        }),
    )
}

pub fn read_release(dir: &Path) -> Result<SanitizedRelease, ReleaseIoError> {
    let deidentified = read_rows(&dir.join(DEIDENTIFIED_FILE), &DEID_HEADER, deid_row)?;
    let importers = read_rows(&dir.join(IMPORTERS_FILE), &IMPORTERS_HEADER, |rec| {
        Ok(ImporterRecord {
            id: rec[0].to_string(),
            name: rec[1].to_string(),
            city: rec[2].to_string(),
            state: rec[3].to_string(),
        })
    })?;
    let by_city = read_rows(&dir.join(CITY_FILE), &CITY_HEADER, |rec| {
        let sh4 = &rec[2];
        if sh4.len() != 4 || !sh4.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid SH4 code {sh4:?}"));
        }
        Ok(CitySummary {
            year_month: year_month(&rec[0], &rec[1])?,
            sh4: sh4.to_string(),
            country: rec[3].to_string(),
            state: rec[4].to_string(),
            city: rec[5].to_string(),
            weight: quantity(&rec[6], Scale::WEIGHT)?,
            value: quantity(&rec[7], Scale::VALUE)?,
        })
    })?;
    let by_state = read_rows(&dir.join(STATE_FILE), &STATE_HEADER, |rec| {
        Ok(StateSummary {
            year_month: year_month(&rec[0], &rec[1])?,
            ncm: ncm(&rec[2])?,
            country: rec[3].to_string(),
            state: rec[4].to_string(),
            weight: quantity(&rec[5], Scale::WEIGHT)?,
            value: quantity(&rec[6], Scale::VALUE)?,
        })
    })?;
    let mut release = SanitizedRelease {
        deidentified,
        importers,
        by_city,
        by_state,
    };
    release.sort();
    Ok(release)
}

pub fn write_ground_truth(path: &Path, transactions: &[MicroTransaction]) -> Result<(), ReleaseIoError> {
    let mut header = DEID_HEADER.to_vec();
    header.extend(["CNPJ", "INCLUSAO"]);
    write_rows(
        path,
        &header,
        transactions.iter().map(|t| {
            let mut row = deid_fields(&DeidentifiedTransaction {
                order: t.order.clone(),
                year_month: t.year_month.clone(),
                ncm: t.ncm.clone(),
                country: t.country.clone(),
                weight: t.weight,
                value: t.value,
            });
            row.push(t.importer.clone());
            row.push(t.class.as_str().to_string());
            row
        }),
    )
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<MicroTransaction>, ReleaseIoError> {
    let mut header = DEID_HEADER.to_vec();
    header.extend(["CNPJ", "INCLUSAO"]);
    let mut rows = read_rows(path, &header, |rec| {
        let t = deid_row(rec)?;
        let class = InclusionClass::parse(&rec[7])
            .ok_or_else(|| format!("unknown inclusion class {:?}", &rec[7]))?;
        Ok(MicroTransaction {
            order: t.order,
            year_month: t.year_month,
            ncm: t.ncm,
            country: t.country,
            value: t.value,
            weight: t.weight,
            importer: rec[6].to_string(),
            class,
        })
    })?;
    rows.sort_by(|a, b| a.order.cmp(&b.order));
    Ok(rows)
}
