use std::path::Path;

use serde::de::DeserializeOwned;

/// Defaults, overlaid with the TOML file at `path` if given. Unknown keys
/// are rejected.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, String> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

pub fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [m, n, nz] = parts.as_slice() else {
        return Err(format!("expected M,N,NZ, got {s:?}"));
    };
    let p = |x: &str| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(m)?, p(n)?, p(nz)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples() {
        assert_eq!(parse_triple("64,128,10"), Ok((64, 128, 10)));
        assert!(parse_triple("64,128").is_err());
        assert!(parse_triple("a,b,c").is_err());
    }
}
