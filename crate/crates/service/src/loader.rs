//! CSV input tables and the generated-table writer.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use sweepscope_core::model::{ItemTable, TableData};
use sweepscope_core::synthetic::{generate, SyntheticData};

use crate::config::InputConfig;
use crate::error::{Result, ServiceError};

/// Loads the configured input: a CSV file or a seeded generator.
pub fn load_input(input: &InputConfig) -> Result<ItemTable> {
    match (&input.path, &input.synthetic) {
        (Some(path), None) => {
            let file = std::fs::File::open(path).map_err(ServiceError::io(path))?;
            read_table(file, input)
        }
        (None, Some(spec)) => Ok(generate(spec)?.table),
        _ => Err(ServiceError::Config("input needs exactly one of `path` or `synthetic`".into())),
    }
}

/// Parses a table with a header row.
///
/// The id column is optional; without it items are numbered from 0. With a
/// text column the table is a corpus; otherwise every column not listed as
/// an attribute must be numeric (empty cells read as missing).
pub fn read_table(reader: impl Read, input: &InputConfig) -> Result<ItemTable> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let id_col = find(&input.id_column);
    let text_col = match &input.text_column {
        Some(name) => Some(find(name).ok_or_else(|| ServiceError::Input(format!("no column `{name}`")))?),
        None => None,
    };
    let mut attr_cols = Vec::new();
    for name in &input.attributes {
        attr_cols.push(find(name).ok_or_else(|| ServiceError::Input(format!("no column `{name}`")))?);
    }
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|c| Some(*c) != id_col && Some(*c) != text_col && !attr_cols.contains(c))
        .collect();
    if text_col.is_some() && !feature_cols.is_empty() {
        let extra: Vec<&str> = feature_cols.iter().map(|&c| headers[c].as_str()).collect();
        return Err(ServiceError::Input(format!(
            "text tables take no feature columns; list {extra:?} under `attributes`"
        )));
    }

    let mut ids = Vec::new();
    let mut docs = Vec::new();
    let mut values = Vec::new();
    let mut attrs: Vec<Vec<String>> = vec![Vec::new(); attr_cols.len()];
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        ids.push(match id_col {
            Some(c) => record[c].to_owned(),
            None => row.to_string(),
        });
        if let Some(c) = text_col {
            docs.push(record[c].to_owned());
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| {
                    ServiceError::Input(format!("row {}: column `{}` is not numeric: `{cell}`", row + 1, headers[c]))
                })?
            };
            values.push(v);
        }
        for (slot, &c) in attrs.iter_mut().zip(&attr_cols) {
            slot.push(record[c].to_owned());
        }
    }

    let mut table = match text_col {
        Some(_) => ItemTable::text(ids, docs),
        None => {
            if feature_cols.is_empty() {
                return Err(ServiceError::Input("no feature columns".into()));
            }
            let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
            let matrix = Array2::from_shape_vec((ids.len(), feature_cols.len()), values)
                .map_err(|e| ServiceError::Input(e.to_string()))?;
            ItemTable::numeric(ids, names, matrix)
        }
    };
    for (name, column) in input.attributes.iter().zip(attrs) {
        table = table.with_attribute(name.clone(), column);
    }
    Ok(table)
}

/// Writes a table as CSV: `id`, then features (or `text`), then attributes.
pub fn write_table(writer: impl Write, table: &ItemTable) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_owned()];
    match &table.data {
        TableData::Numeric { names, .. } => header.extend(names.iter().cloned()),
        TableData::Text(_) => header.push("text".into()),
    }
    header.extend(table.attributes.keys().cloned());
    csv.write_record(&header)?;
    for (i, id) in table.item_ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        match &table.data {
            TableData::Numeric { values, .. } => record.extend(values.row(i).iter().map(|v| v.to_string())),
            TableData::Text(docs) => record.push(docs[i].clone()),
        }
        record.extend(table.attributes.values().map(|column| column[i].clone()));
        csv.write_record(&record)?;
    }
    csv.flush().map_err(ServiceError::io("<table>"))?;
    Ok(())
}

pub fn write_generated(path: &Path, data: &SyntheticData) -> Result<()> {
    let file = std::fs::File::create(path).map_err(ServiceError::io(path))?;
    write_table(std::io::BufWriter::new(file), &data.table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(attributes: &[&str], text: Option<&str>) -> InputConfig {
        InputConfig {
            path: None,
            synthetic: None,
            id_column: "id".into(),
            text_column: text.map(str::to_owned),
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn numeric_table_with_attributes() {
        let csv = "id,x,region,y\na,1,north,2\nb,3,south,\n";
        let t = read_table(csv.as_bytes(), &input(&["region"], None)).unwrap();
        assert_eq!(t.item_ids, ["a", "b"]);
        let f = t.features().unwrap();
        assert_eq!(f[[1, 0]], 3.0);
        assert!(f[[1, 1]].is_nan());
        assert_eq!(t.attributes["region"], ["north", "south"]);
    }

    #[test]
    fn text_table_round_trips() {
        let csv = "id,text,truth\n1,\"red apples, green pears\",0\n2,blue sky,1\n";
        let t = read_table(csv.as_bytes(), &input(&["truth"], Some("text"))).unwrap();
        let mut out = Vec::new();
        write_table(&mut out, &t).unwrap();
        let again = read_table(out.as_slice(), &input(&["truth"], Some("text"))).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn non_numeric_feature_is_reported() {
        let csv = "id,x\na,oops\n";
        assert!(matches!(read_table(csv.as_bytes(), &input(&[], None)), Err(ServiceError::Input(_))));
    }

    #[test]
    fn missing_id_column_numbers_rows() {
        let t = read_table("x,y\n1,2\n3,4\n".as_bytes(), &input(&[], None)).unwrap();
        assert_eq!(t.item_ids, ["0", "1"]);
    }
}
