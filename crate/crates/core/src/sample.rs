//! Identifiers shared by every stage: which log, which end, which acquisition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Top,
    Bottom,
}

impl End {
    pub const BOTH: [End; 2] = [End::Top, End::Bottom];

    pub fn as_str(self) -> &'static str {
        match self {
            End::Top => "top",
            End::Bottom => "bottom",
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for End {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top" => Ok(End::Top),
            "bottom" => Ok(End::Bottom),
            other => Err(Error::InvalidInput(format!("unknown log end {other:?}"))),
        }
    }
}

/// Identity class of an acquisition. The two ends of one log are distinct classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub log_id: String,
    pub end: End,
}

impl ClassLabel {
    pub fn new(log_id: impl Into<String>, end: End) -> Self {
        Self {
            log_id: log_id.into(),
            end,
        }
    }

    /// Same log, other end: never a valid negative and never a scored pair.
    pub fn is_opposite_end_of(&self, other: &ClassLabel) -> bool {
        self.log_id == other.log_id && self.end != other.end
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.log_id, self.end)
    }
}

/// One image of one log end in one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AcquisitionId {
    pub dataset_tag: String,
    pub log_id: String,
    pub end: End,
    pub acq_index: u32,
}

impl AcquisitionId {
    pub fn new(
        dataset_tag: impl Into<String>,
        log_id: impl Into<String>,
        end: End,
        acq_index: u32,
    ) -> Self {
        Self {
            dataset_tag: dataset_tag.into(),
            log_id: log_id.into(),
            end,
            acq_index,
        }
    }

    pub fn label(&self) -> ClassLabel {
        ClassLabel::new(self.log_id.clone(), self.end)
    }

    /// File stem used for patches: `<log>_<end>_<acq>`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.log_id, self.end, self.acq_index)
    }
}

impl fmt::Display for AcquisitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.dataset_tag, self.log_id, self.end, self.acq_index
        )
    }
}

impl FromStr for AcquisitionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        let [tag, log, end, acq] = parts.as_slice() else {
            return Err(Error::InvalidInput(format!(
                "malformed acquisition id {s:?}"
            )));
        };
        let acq_index = acq
            .parse()
            .map_err(|_| Error::InvalidInput(format!("malformed acquisition index in {s:?}")))?;
        Ok(Self::new(*tag, *log, end.parse()?, acq_index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_display_parses_back() {
        let id = AcquisitionId::new("SM", "log007", End::Bottom, 2);
        assert_eq!(id.to_string(), "SM/log007/bottom/2");
        assert_eq!(id.to_string().parse::<AcquisitionId>().unwrap(), id);
        assert_eq!(id.stem(), "log007_bottom_2");
    }

    #[test]
    fn opposite_end_detection() {
        let a = ClassLabel::new("log1", End::Top);
        assert!(a.is_opposite_end_of(&ClassLabel::new("log1", End::Bottom)));
        assert!(!a.is_opposite_end_of(&ClassLabel::new("log1", End::Top)));
        assert!(!a.is_opposite_end_of(&ClassLabel::new("log2", End::Bottom)));
    }

    #[test]
    fn malformed_ids_are_rejected() {
        assert!("SM/log1/top".parse::<AcquisitionId>().is_err());
        assert!("SM/log1/side/0".parse::<AcquisitionId>().is_err());
        assert!("SM/log1/top/x".parse::<AcquisitionId>().is_err());
    }
}
