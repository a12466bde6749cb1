use std::path::Path;

use rsjd::NumericalSettings;
use serde_json::Value;

use crate::CliError;

/// Defaults, then the overlay file, then `KEY=VALUE` overrides.
pub fn load_settings(file: Option<&Path>, overrides: &[String]) -> Result<NumericalSettings, CliError> {
    let mut v = serde_json::to_value(NumericalSettings::default()).expect("settings serialise");
    let obj = v.as_object_mut().expect("settings are an object");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let overlay: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let Value::Object(map) = overlay else {
            return Err(CliError::Input(format!("{}: settings must be a JSON object", path.display())));
        };
        obj.extend(map);
    }
    for kv in overrides {
        let Some((k, raw)) = kv.split_once('=') else {
            return Err(CliError::Input(format!("--set expects KEY=VALUE, got '{kv}'")));
        };
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        obj.insert(k.trim().to_string(), value);
    }
    serde_json::from_value(v).map_err(|e| CliError::Input(format!("settings: {e}")))
}
