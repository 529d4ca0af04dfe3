use super::camera::ViewTag;
use crate::error::{Error, Result};

/// Prefixes `base` with the view direction, e.g. "front view of a chair".
pub fn directional_prompt(tag: ViewTag, base: &str) -> Result<String> {
    if base.trim().is_empty() {
        return Err(Error::InvalidConfig("prompt base must be nonempty".into()));
    }
    Ok(format!("{}{}", tag.prefix(), base))
}
