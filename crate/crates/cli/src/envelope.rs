use std::path::Path;

use fetmosaic::{Error, Homography};
use serde::{Deserialize, Serialize};

/// Pairwise homographies of one sequence as written by `register`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomographyEnvelope {
    pub video_id: String,
    pub frame_count: usize,
    pub pairwise: Vec<Homography>,
}

impl HomographyEnvelope {
    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .pairwise
            .iter()
            .map(|h| serde_json::to_string(h).expect("finite homography"))
            .collect();
        format!(
            "{{\n  \"video_id\": {},\n  \"frame_count\": {},\n  \"pairwise\": [\n    {}\n  ]\n}}\n",
            serde_json::to_string(&self.video_id).expect("string"),
            self.frame_count,
            rows.join(",\n    ")
        )
    }

    /// Checks the envelope against a sequence of `frames` frames.
    pub fn check(&self, frames: usize) -> Result<(), Error> {
        if self.frame_count != frames {
            return Err(Error::LengthMismatch {
                expected: frames,
                got: self.frame_count,
            });
        }
        if self.pairwise.len() + 1 != frames {
            return Err(Error::LengthMismatch {
                expected: frames.saturating_sub(1),
                got: self.pairwise.len(),
            });
        }
        Ok(())
    }
}
