//! Loading TOML or JSON run configurations.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Parse `path` (JSON if the extension is `.json`, TOML otherwise) into `T`,
/// or return `T::default()` when no file is given. Unknown keys are errors.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        let t: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| CliError::Config(e.to_string()))?
    };
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_kernel_files(&mut value, base)?;
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Replace `kernel = { type = "file", file = "phi.csv" }` by the tabulated
/// kernel read from the CSV (`x,phi` header).
fn resolve_kernel_files(value: &mut Value, base: &Path) -> Result<()> {
    let Some(kernel) = value.get_mut("kernel").and_then(Value::as_object_mut) else {
        return Ok(());
    };
    if kernel.get("type").and_then(Value::as_str) != Some("file") {
        return Ok(());
    }
    if kernel.len() != 2 {
        return Err(CliError::Config("a file kernel takes exactly the key `file`".into()));
    }
    let file = kernel
        .get("file")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Config("file kernel needs `file`".into()))?;
    let path = base.join(file);
    let (x, phi) = read_table(&path)?;
    *kernel = serde_json::Map::from_iter([
        ("type".to_string(), Value::from("table")),
        ("x".to_string(), Value::from(x)),
        ("phi".to_string(), Value::from(phi)),
    ]);
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().map(str::trim);
    if header != Some("x,phi") {
        return Err(CliError::Config(format!("{}: expected header `x,phi`", path.display())));
    }
    let (mut x, mut phi) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad row {}", path.display(), k + 2)))
        };
        let mut cols = line.split(',');
        x.push(parse(cols.next())?);
        phi.push(parse(cols.next())?);
    }
    Ok((x, phi))
}
