//! Class lists: names, seen/unseen roles and superclasses.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassRole {
    Seen,
    Unseen,
    /// A seen class that is treated as unseen while the score scale is fitted.
    UnseenImitation,
}

impl ClassRole {
    /// Seen and unseen-imitation classes both have training annotations.
    pub fn is_seen(self) -> bool {
        !matches!(self, ClassRole::Unseen)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassRole::Seen => "seen",
            ClassRole::Unseen => "unseen",
            ClassRole::UnseenImitation => "unseen_imitation",
        }
    }
}

impl fmt::Display for ClassRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "seen" => Ok(ClassRole::Seen),
            "unseen" => Ok(ClassRole::Unseen),
            "unseen_imitation" => Ok(ClassRole::UnseenImitation),
            other => Err(format!(
                "unknown role `{other}` (expected seen, unseen or unseen_imitation)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    pub role: ClassRole,
    pub superclass: String,
}

impl ClassEntry {
    pub fn new(name: impl Into<String>, role: ClassRole, superclass: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role,
            superclass: superclass.into(),
        }
    }

    /// Words of a (possibly multi-word) class name, split on ASCII whitespace.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.name.split_ascii_whitespace()
    }
}

/// Ordered class list. File order is significant: it fixes the coordinate
/// order of similarity embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassList {
    entries: Vec<ClassEntry>,
    index: HashMap<String, usize>,
}

impl ClassList {
    pub fn new(entries: Vec<ClassEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if entry.name.trim().is_empty() {
                return Err(Error::Contract(format!("class {i} has an empty name")));
            }
            if index.insert(entry.name.clone(), i).is_some() {
                return Err(Error::Contract(format!(
                    "duplicate class name `{}`",
                    entry.name
                )));
            }
        }
        if !entries.iter().any(|e| e.role.is_seen()) {
            return Err(Error::Contract("class list has no seen classes".into()));
        }
        Ok(Self { entries, index })
    }

    /// Parses `name<TAB>role<TAB>superclass` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::format(lineno, e.to_string()))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::format(
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let role = fields[1]
                .trim()
                .parse::<ClassRole>()
                .map_err(|m| Error::format(lineno, m))?;
            entries.push(ClassEntry::new(fields[0].trim(), role, fields[2].trim()));
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ClassEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn require(&self, name: &str) -> Result<&ClassEntry> {
        self.get(name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Seen classes (including unseen-imitation ones) in file order.
    pub fn seen(&self) -> impl Iterator<Item = &ClassEntry> {
        self.entries.iter().filter(|e| e.role.is_seen())
    }

    pub fn unseen(&self) -> impl Iterator<Item = &ClassEntry> {
        self.entries.iter().filter(|e| e.role == ClassRole::Unseen)
    }

    pub fn imitation(&self) -> impl Iterator<Item = &ClassEntry> {
        self.entries
            .iter()
            .filter(|e| e.role == ClassRole::UnseenImitation)
    }

    pub fn seen_count(&self) -> usize {
        self.seen().count()
    }

    /// Mask over seen-class coordinates: `true` where the seen class is an
    /// unseen-imitation class.
    pub fn imitation_mask(&self) -> Vec<bool> {
        self.seen()
            .map(|e| e.role == ClassRole::UnseenImitation)
            .collect()
    }

    pub fn superclass_of(&self, name: &str) -> Result<&str> {
        self.require(name).map(|e| e.superclass.as_str())
    }
}
