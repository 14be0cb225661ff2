use std::path::{Path, PathBuf};

use crate::error::Result;

/// Removes the files and directories a stage created unless the stage
/// finishes and calls [`OutputGuard::commit`].
#[derive(Debug, Default)]
pub struct OutputGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a file about to be written.
    pub fn track(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    /// Creates `dir` (and parents), remembering the outermost directory
    /// that did not exist yet.
    pub fn create_dir_all(&mut self, dir: &Path) -> Result<()> {
        let mut first_missing = None;
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            first_missing = Some(d.to_path_buf());
            cur = d.parent();
        }
        std::fs::create_dir_all(dir)?;
        if let Some(d) = first_missing {
            self.dirs.push(d);
        }
        Ok(())
    }

    pub fn commit(&mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in self.files.iter().rev() {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir_all(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a/b");
        let file = tmp.path().join("x.csv");
        {
            let mut g = OutputGuard::new();
            g.create_dir_all(&dir).unwrap();
            g.track(&file);
            std::fs::write(&file, "1").unwrap();
        }
        assert!(!file.exists());
        assert!(!tmp.path().join("a").exists());
        {
            let mut g = OutputGuard::new();
            g.track(&file);
            std::fs::write(&file, "1").unwrap();
            g.commit();
        }
        assert!(file.exists());
    }
}
