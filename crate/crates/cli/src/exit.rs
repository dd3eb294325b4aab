use std::fmt;

/// Invalid flags, configuration or input file: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Malformed data row: exit code 3.
#[derive(Debug)]
pub struct RowError {
    pub row: usize,
    pub msg: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.msg)
    }
}

impl std::error::Error for RowError {}

pub fn usage(e: impl fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

pub fn code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<UsageError>().is_some() {
        2
    } else if e.downcast_ref::<RowError>().is_some() {
        3
    } else {
        1
    }
}
