//! Run configuration: a TOML file of (possibly dotted) keys, overridden by
//! `--set key=value` pairs and typed flags, deserialized into the command's
//! settings struct.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

/// Parses an override value as a TOML scalar or array, falling back to a
/// bare string.
pub fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `dotted.key` in `table`, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::config(format!("empty key `{key}`")))?;
    let mut node = table;
    for p in parts {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("`{p}` in `{key}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Reads a config file. A run manifest is accepted too: its `config` table
/// is used after checking the recorded command.
pub fn load_file(path: &Path, command: &str) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new("io", format!("reading config {}: {e}", path.display())))?;
    let mut table: Table = text
        .parse()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if let (Some(Value::String(recorded)), Some(Value::Table(_))) = (table.get("command"), table.get("config")) {
        if recorded != command {
            return Err(CliError::config(format!(
                "manifest {} records command `{recorded}`, not `{command}`",
                path.display()
            )));
        }
        if let Some(Value::Table(cfg)) = table.remove("config") {
            return Ok(cfg);
        }
    }
    Ok(table)
}

/// Recursively overlays `top` onto `base`; non-table values replace.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Overlays the file, `--set` pairs and flag overrides, in that order of
/// increasing precedence, on the defaults and deserializes the result.
pub fn resolve<T: DeserializeOwned + Serialize + Default>(
    file: Option<&Path>,
    command: &str,
    sets: &[String],
    flags: Vec<(&str, Value)>,
) -> Result<T, CliError> {
    let mut table = to_table(&T::default())?;
    if let Some(p) = file {
        merge(&mut table, load_file(p, command)?);
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    for (k, v) in flags {
        set_path(&mut table, k, v)?;
    }
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))
}

/// The effective config as a TOML table.
pub fn to_table<T: Serialize>(config: &T) -> Result<Table, CliError> {
    Table::try_from(config).map_err(|e| CliError::config(format!("serializing config: {e}")))
}

/// `dotted.key = value` lines for every leaf, sorted by key.
pub fn flatten(table: &Table) -> Vec<(String, Value)> {
    fn walk(prefix: &str, t: &Table, out: &mut Vec<(String, Value)>) {
        for (k, v) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                Value::Table(inner) => walk(&key, inner, out),
                other => out.push((key, other.clone())),
            }
        }
    }
    let mut out = Vec::new();
    walk("", table, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Deserialize, Serialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Inner {
        chains: usize,
        step: f64,
    }

    #[derive(Debug, Default, Deserialize, Serialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        name: String,
        inner: Inner,
        list: Vec<String>,
    }

    #[test]
    fn values_parse_as_toml_or_string() {
        assert_eq!(parse_value("3"), Value::Integer(3));
        assert_eq!(parse_value("0.5"), Value::Float(0.5));
        assert_eq!(parse_value("true"), Value::Boolean(true));
        assert_eq!(parse_value("out/dir"), Value::String("out/dir".into()));
        assert_eq!(
            parse_value("[\"a\", \"b\"]"),
            Value::Array(vec![Value::String("a".into()), Value::String("b".into())])
        );
    }

    #[test]
    fn flags_override_sets_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "name = \"file\"\ninner.chains = 2\ninner.step = 0.1\n").unwrap();
        let d: Demo = resolve(
            Some(&path),
            "x",
            &["inner.chains=5".into(), "name=set".into()],
            vec![("name", Value::String("flag".into()))],
        )
        .unwrap();
        assert_eq!(d.name, "flag");
        assert_eq!(d.inner, Inner { chains: 5, step: 0.1 });
    }

    #[test]
    fn partial_nested_keys_keep_defaults() {
        #[derive(Debug, Deserialize, Serialize)]
        #[serde(deny_unknown_fields)]
        struct Pair {
            a: f64,
            b: f64,
        }
        #[derive(Debug, Deserialize, Serialize)]
        #[serde(default, deny_unknown_fields)]
        struct Outer {
            pair: Pair,
        }
        impl Default for Outer {
            fn default() -> Self {
                Outer { pair: Pair { a: 1.0, b: 2.0 } }
            }
        }
        let o: Outer = resolve(None, "x", &["pair.a=5".into()], vec![]).unwrap();
        assert_eq!((o.pair.a, o.pair.b), (5.0, 2.0));
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = resolve::<Demo>(None, "x", &["inner.chanes=5".into()], vec![]).unwrap_err();
        assert_eq!(err.kind, "config");
        assert!(err.message.contains("chanes"), "{}", err.message);
    }

    #[test]
    fn manifest_config_table_is_used() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        std::fs::write(&path, "command = \"fit\"\n[config]\nname = \"m\"\n").unwrap();
        let d: Demo = resolve(Some(&path), "fit", &[], vec![]).unwrap();
        assert_eq!(d.name, "m");
        assert_eq!(resolve::<Demo>(Some(&path), "pool", &[], vec![]).unwrap_err().kind, "config");
    }

    #[test]
    fn flatten_sorts_dotted_leaves() {
        let t = to_table(&Demo {
            name: "n".into(),
            inner: Inner { chains: 1, step: 2.0 },
            list: vec![],
        })
        .unwrap();
        let keys: Vec<String> = flatten(&t).into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, ["inner.chains", "inner.step", "list", "name"]);
    }
}
