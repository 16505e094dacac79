//! Flat CSV format for instances.
//!
//! Packages file: `id,attr_1,...,attr_k`.
//! Bins file: `id,cap_1,...,cap_k,tol_1,...,tol_k`.
//! Quantities are plain decimal strings parsed exactly at the given scales.
//! The target package and target bin are supplied separately.

use std::io::{Read, Write};

use thiserror::Error;

use super::{AllocationError, AllocationInstance, Bin, Package};
use crate::quantity::{ParseQuantityError, Quantity, Scale};

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{file} row {row}: {source}")]
    Quantity {
        file: &'static str,
        row: usize,
        source: ParseQuantityError,
    },
    #[error("{file}: {reason}")]
    Layout { file: &'static str, reason: String },
    #[error(transparent)]
    Instance(#[from] AllocationError),
}

/// Reads an instance; `scales` gives one scale per attribute and fixes `k`.
pub fn read_instance<P: Read, B: Read>(
    packages: P,
    bins: B,
    scales: &[Scale],
) -> Result<AllocationInstance, InstanceIoError> {
    let k = scales.len();
    let parse = |file, row, text: &str, scale| {
        Quantity::parse(text, scale).map_err(|source| InstanceIoError::Quantity { file, row, source })
    };

    let mut rdr = csv::Reader::from_reader(packages);
    let width = rdr.headers()?.len();
    if width != k + 1 {
        return Err(InstanceIoError::Layout {
            file: "packages",
            reason: format!("expected {} columns, found {width}", k + 1),
        });
    }
    let mut pkgs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let attrs = (0..k)
            .map(|a| parse("packages", row, &rec[a + 1], scales[a]))
            .collect::<Result<_, _>>()?;
        pkgs.push(Package::new(&rec[0], attrs));
    }

    let mut rdr = csv::Reader::from_reader(bins);
    let width = rdr.headers()?.len();
    if width != 2 * k + 1 {
        return Err(InstanceIoError::Layout {
            file: "bins",
            reason: format!("expected {} columns, found {width}", 2 * k + 1),
        });
    }
    let mut out_bins = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let cap = (0..k)
            .map(|a| parse("bins", row, &rec[a + 1], scales[a]))
            .collect::<Result<_, _>>()?;
        let tol = (0..k)
            .map(|a| parse("bins", row, &rec[k + a + 1], scales[a]))
            .collect::<Result<_, _>>()?;
        out_bins.push(Bin::new(&rec[0], cap, tol));
    }

    Ok(AllocationInstance::new(k, pkgs, out_bins)?)
}

pub fn write_instance<P: Write, B: Write>(
    inst: &AllocationInstance,
    scales: &[Scale],
    packages: P,
    bins: B,
) -> Result<(), InstanceIoError> {
    let k = inst.k();
    if scales.len() != k {
        return Err(InstanceIoError::Layout {
            file: "packages",
            reason: format!("{} scales for {k} attributes", scales.len()),
        });
    }
    let mut w = csv::Writer::from_writer(packages);
    let mut header = vec!["id".to_string()];
    header.extend((1..=k).map(|i| format!("attr_{i}")));
    w.write_record(&header)?;
    for p in inst.packages() {
        let mut rec = vec![p.id.clone()];
        rec.extend(p.attrs.iter().zip(scales).map(|(q, &s)| q.display(s).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv::Writer::from_writer(bins);
    let mut header = vec!["id".to_string()];
    header.extend((1..=k).map(|i| format!("cap_{i}")));
    header.extend((1..=k).map(|i| format!("tol_{i}")));
    w.write_record(&header)?;
    for b in inst.bins() {
        let mut rec = vec![b.id.clone()];
        rec.extend(b.capacity.iter().zip(scales).map(|(q, &s)| q.display(s).to_string()));
        rec.extend(b.tolerance.iter().zip(scales).map(|(q, &s)| q.display(s).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
