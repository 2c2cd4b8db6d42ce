#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

pub const CLASSES: &str = "\
# name\trole\tsuperclass
cat\tseen\tanimal
dog\tseen\tanimal
car\tseen\tvehicle
horse\tunseen_imitation\tanimal
bus\tunseen\tvehicle
zebra\tunseen\tanimal
";

/// Four-dimensional so that raw vectors and similarity embeddings (one
/// coordinate per seen class) share a cell dimension.
pub const VECTORS: &str = "\
cat 1 0 0 0
dog 0.6 0.8 0 0
car 0 0 3 0
horse 0.2 0.3 0 0.9
bus 0 0.2 1 0.1
zebra 0 1 0.5 0.3
";

pub const GT: &str = r#"{"image_id":"img1","class":"cat","bbox":[0,0,10,10]}
{"image_id":"img1","class":"bus","bbox":[20,20,10,10]}
{"image_id":"img2","class":"zebra","bbox":[5,5,8,8]}
{"image_id":"img2","class":"dog","bbox":[30,0,10,12]}
"#;

pub const DETS: &str = r#"{"image_id":"img1","class":"cat","score":0.9,"bbox":[1,1,10,10]}
{"image_id":"img1","class":"dog","score":0.7,"bbox":[0,0,9,9]}
{"image_id":"img1","class":"bus","score":0.6,"bbox":[20,21,10,10]}
{"image_id":"img2","class":"zebra","score":0.4,"bbox":[5,5,8,8]}
{"image_id":"img2","class":"car","score":0.3,"bbox":[30,0,10,12]}
{"image_id":"img2","class":"dog","score":0.2,"bbox":[60,60,5,5]}
"#;

/// Cell vectors with boxes over the same images as [`GT`].
pub const CELLS: &str = r#"{"image_id":"img1","cell_index":0,"objectness":0.9,"label":"cat","vector":[1.9,1.6,1.0,1.2],"bbox":[1,1,10,10]}
{"image_id":"img1","cell_index":1,"objectness":0.8,"vector":[1.1,1.2,1.9,1.1],"bbox":[20,21,10,10]}
{"image_id":"img1","cell_index":2,"objectness":0.2,"vector":[1.0,1.0,1.0,1.0],"bbox":[40,40,3,3]}
{"image_id":"img2","cell_index":0,"objectness":0.7,"label":"dog","vector":[1.5,1.9,1.0,1.3],"bbox":[30,0,10,12]}
{"image_id":"img2","cell_index":1,"objectness":0.6,"vector":[1.2,1.7,1.3,1.5],"bbox":[5,5,8,8]}
{"image_id":"img2","cell_index":2,"objectness":0.95,"label":"horse","vector":[1.3,1.4,1.0,1.9],"bbox":[50,50,6,6]}
"#;

pub const CAPTIONS: &str = r#"{"image_id":"img1","candidate":"a cat sitting next to a red vehicle","references":["a cat sitting near a red bus","a small cat by the road"]}
{"image_id":"img2","candidate":"a horse standing in a grassy field","references":["a zebra standing in a grassy field","a zebra and a dog outside"]}
{"image_id":"img3","candidate":"a dog running on the beach","references":["a dog running along the beach"]}
"#;

pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    /// Workspace with the default fixture files written.
    pub fn with_fixture() -> Self {
        let ws = Self::new();
        ws.write("classes.tsv", CLASSES);
        ws.write("vectors.txt", VECTORS);
        ws.write("gt.jsonl", GT);
        ws.write("dets.jsonl", DETS);
        ws.write("cells.jsonl", CELLS);
        ws.write("captions.jsonl", CAPTIONS);
        ws
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, contents).expect("write fixture");
        p
    }

    pub fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).expect("read output")
    }

    pub fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&self.read(name)).expect("output is JSON")
    }

    /// Runs `zscap` with arguments; names not starting with `-` are resolved
    /// inside the workspace.
    pub fn run(&self, args: &[&str]) -> Output {
        let resolved: Vec<String> = args
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let takes_path = i > 0
                    && args[i - 1].starts_with("--")
                    && a.contains('.')
                    && a.parse::<f64>().is_err();
                if takes_path && !Path::new(a).is_absolute() {
                    self.path(a).display().to_string()
                } else {
                    a.to_string()
                }
            })
            .collect();
        Command::new(env!("CARGO_BIN_EXE_zscap"))
            .args(&resolved)
            .output()
            .expect("spawn zscap")
    }

    pub fn run_ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "zscap {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
