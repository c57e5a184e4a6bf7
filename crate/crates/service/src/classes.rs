//! Class-attribute requests and their CSV export.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use sweepscope_core::model::{group_label, IterationResult};
use sweepscope_core::transitions::{class_connector_detail, class_full, class_transition, ClassAttribute};
use sweepscope_core::CoreError;

use crate::error::{Result, ServiceError};

/// Which class attribute to materialize, mirroring the context-menu actions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    /// Every item labeled by its group in one iteration.
    Full { iteration: String },
    /// Members of one group labeled by their destination group.
    Transition { from: String, group: i64, to: String },
    /// `left only` / `shared` / `right only` for a pair of groups.
    ConnectorDetail { from: String, from_group: i64, to: String, to_group: i64 },
}

impl ClassSpec {
    /// Stable identifier, usable as a file name.
    pub fn id(&self) -> String {
        let raw = match self {
            ClassSpec::Full { iteration } => format!("full_{iteration}"),
            ClassSpec::Transition { from, group, to } => format!("transition_{}_{to}", group_label(from, *group)),
            ClassSpec::ConnectorDetail { from, from_group, to, to_group } => {
                format!("detail_{}_{}", group_label(from, *from_group), group_label(to, *to_group))
            }
        };
        raw.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
    }

    pub fn iteration_keys(&self) -> Vec<&str> {
        match self {
            ClassSpec::Full { iteration } => vec![iteration],
            ClassSpec::Transition { from, to, .. } | ClassSpec::ConnectorDetail { from, to, .. } => vec![from, to],
        }
    }

    /// Builds the attribute; `lookup` resolves iteration keys.
    pub fn build<'a>(&self, lookup: impl Fn(&str) -> Option<&'a IterationResult>) -> Result<ClassAttribute> {
        let get = |key: &str| lookup(key).ok_or_else(|| CoreError::UnknownIteration(key.to_owned()));
        Ok(match self {
            ClassSpec::Full { iteration } => class_full(get(iteration)?),
            ClassSpec::Transition { from, group, to } => class_transition(get(from)?, *group, get(to)?)?,
            ClassSpec::ConnectorDetail { from, from_group, to, to_group } => {
                class_connector_detail(get(from)?, *from_group, get(to)?, *to_group)?
            }
        })
    }
}

/// A class attribute as read back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassExport {
    pub name: String,
    pub item_ids: Vec<String>,
    pub values: Vec<String>,
    pub attributes: BTreeMap<String, Vec<String>>,
}

/// `item_id,<name>` followed by the table's carried-through attribute
/// columns, one row per item.
pub fn write_class_csv(
    writer: impl Write,
    class: &ClassAttribute,
    item_ids: &[String],
    attributes: &BTreeMap<String, Vec<String>>,
) -> Result<()> {
    if class.values.len() != item_ids.len() {
        return Err(CoreError::LengthMismatch { expected: item_ids.len(), actual: class.values.len() }.into());
    }
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["item_id", class.name.as_str()];
    header.extend(attributes.keys().map(String::as_str));
    out.write_record(&header)?;
    for (i, (id, value)) in item_ids.iter().zip(&class.values).enumerate() {
        let mut row = vec![id.as_str(), value.as_str()];
        row.extend(attributes.values().map(|column| column[i].as_str()));
        out.write_record(&row)?;
    }
    out.flush().map_err(ServiceError::io("<class csv>"))?;
    Ok(())
}

pub fn read_class_csv(reader: impl Read) -> Result<ClassExport> {
    let mut csv = csv::Reader::from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 || header[0] != "item_id" {
        return Err(ServiceError::Input("class CSV must start with `item_id,<attribute>`".into()));
    }
    let mut export = ClassExport {
        name: header[1].clone(),
        item_ids: Vec::new(),
        values: Vec::new(),
        attributes: header[2..].iter().map(|h| (h.clone(), Vec::new())).collect(),
    };
    for record in csv.records() {
        let record = record?;
        export.item_ids.push(record[0].to_owned());
        export.values.push(record[1].to_owned());
        for (name, cell) in header[2..].iter().zip(record.iter().skip(2)) {
            export.attributes.get_mut(name).expect("declared in header").push(cell.to_owned());
        }
    }
    Ok(export)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_file_safe() {
        let spec = ClassSpec::Transition { from: "0.05".into(), group: -1, to: "0.1".into() };
        assert_eq!(spec.id(), "transition_0.05.noise_0.1");
        let detail = ClassSpec::ConnectorDetail { from: "3".into(), from_group: 1, to: "4".into(), to_group: 0 };
        assert_eq!(detail.id(), "detail_3.1_4.0");
    }

    #[test]
    fn spec_json_shape() {
        let spec: ClassSpec = serde_json::from_str(r#"{"kind":"full","iteration":"20"}"#).unwrap();
        assert_eq!(spec, ClassSpec::Full { iteration: "20".into() });
        assert!(serde_json::from_str::<ClassSpec>(r#"{"kind":"full","iteration":"20","x":1}"#).is_err());
    }
}
