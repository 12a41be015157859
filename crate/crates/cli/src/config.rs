//! JSON config files mirroring the command-line flags.
//!
//! Global keys sit at the top level; the keys of a subcommand sit under its
//! name, e.g. `{"seed": 7, "condition": {"n": 12, "chains": 4}}`. Flags
//! given on the command line override the file.

use std::path::Path;

use droplab::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Parsed config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(root)) => Ok(ConfigFile { root }),
            Ok(_) => Err(Error::input("config file must hold a JSON object")),
            Err(e) => Err(Error::Parse(format!("config {}: {e}", path.display()))),
        }
    }

    /// Top-level keys, without the subcommand sections.
    pub fn globals(&self, sections: &[&str]) -> Value {
        Value::Object(
            self.root
                .iter()
                .filter(|(k, _)| !sections.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    pub fn section(&self, name: &str) -> Result<Value> {
        match self.root.get(name) {
            None => Ok(Value::Object(Map::new())),
            Some(v @ Value::Object(_)) => Ok(v.clone()),
            Some(_) => Err(Error::input(format!("config section `{name}` must be an object"))),
        }
    }
}

/// Overlay the flags that were given onto `file` and rebuild the struct.
pub fn merge<T: Serialize + DeserializeOwned + Default>(cli: &T, file: Value, what: &str) -> Result<T> {
    if let (Value::Object(f), Value::Object(known)) = (&file, serde_json::to_value(T::default())?) {
        if let Some(k) = f.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::input(format!("{what}: unknown key `{k}`")));
        }
    }
    let mut flags = serde_json::to_value(cli)?;
    strip_unset(&mut flags);
    let mut base = file;
    // `p` and `beta` are alternatives: a flag for one drops the other
    if let (Value::Object(b), Value::Object(f)) = (&mut base, &flags) {
        if f.contains_key("p") {
            b.remove("beta");
        }
        if f.contains_key("beta") {
            b.remove("p");
        }
    }
    overlay(&mut base, flags);
    serde_json::from_value(base).map_err(|e| Error::input(format!("{what}: {e}")))
}

/// Drop nulls and unset switches so that only given flags remain.
fn strip_unset(v: &mut Value) {
    if let Value::Object(m) = v {
        m.retain(|_, x| !matches!(x, Value::Null | Value::Bool(false)));
        for x in m.values_mut() {
            strip_unset(x);
        }
    }
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
