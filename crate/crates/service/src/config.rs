use std::path::PathBuf;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Clone, Debug)]
pub struct Config {
    pub data_dir: PathBuf,
    /// Shared bearer token. Requests are unauthenticated when unset.
    pub token: Option<String>,
    pub port: u16,
    /// Analysis jobs allowed to run at once.
    pub max_jobs: usize,
}

impl Config {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            token: None,
            port: DEFAULT_PORT,
            max_jobs: default_parallelism(),
        }
    }

    /// Reads `LEVERS_DATA_DIR`, `LEVERS_TOKEN`, `LEVERS_PORT` and
    /// `LEVERS_MAX_JOBS`.
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut config = Self::new(get("LEVERS_DATA_DIR").unwrap_or_else(|| "levers-data".into()));
        config.token = get("LEVERS_TOKEN").filter(|t| !t.is_empty());
        if let Some(port) = get("LEVERS_PORT") {
            config.port = port
                .parse()
                .map_err(|_| format!("LEVERS_PORT must be a port number, got {port:?}"))?;
        }
        if let Some(jobs) = get("LEVERS_MAX_JOBS") {
            config.max_jobs = match jobs.parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => return Err(format!("LEVERS_MAX_JOBS must be a positive integer, got {jobs:?}")),
            };
        }
        Ok(config)
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_overrides() {
        let c = Config::from_lookup(|k| match k {
            "LEVERS_DATA_DIR" => Some("/tmp/x".into()),
            "LEVERS_PORT" => Some("9000".into()),
            "LEVERS_MAX_JOBS" => Some("2".into()),
            "LEVERS_TOKEN" => Some(String::new()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!((c.port, c.max_jobs, c.token), (9000, 2, None));
    }

    #[test]
    fn rejects_zero_jobs() {
        let c = Config::from_lookup(|k| (k == "LEVERS_MAX_JOBS").then(|| "0".to_string()));
        assert!(c.is_err());
    }
}
