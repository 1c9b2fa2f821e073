use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::kv::{read_file, write_file, KvDoc, KvWriter};
use crate::{Error, Result};

use super::two_stage::{CombineMode, InputSpec, Network, TwoStageModel};
use super::unet::{ModelParams, UNetConfig};

const FORMAT: &str = "oya-checkpoint";
const VERSION: u32 = 1;
const MANIFEST: &str = "manifest.txt";
const PARAMS: &str = "params.bin";

/// Training history of a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageTag {
    Scratch,
    Pretrained,
    Finetuned,
}

impl fmt::Display for StageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageTag::Scratch => "scratch",
            StageTag::Pretrained => "pretrained",
            StageTag::Finetuned => "finetuned",
        })
    }
}

impl FromStr for StageTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(StageTag::Scratch),
            "pretrained" => Ok(StageTag::Pretrained),
            "finetuned" => Ok(StageTag::Finetuned),
            _ => Err(Error::Config(format!("unknown stage `{s}`"))),
        }
    }
}

/// A model plus the metadata needed to reproduce or continue it. Saving is
/// deterministic: the same checkpoint always produces the same bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: StageTag,
    pub model: TwoStageModel,
    pub seed: u64,
    /// Optimizer steps accumulated over the whole lineage.
    pub steps: u64,
    /// Stage tags from the first training run to this one, `>`-separated.
    pub lineage: String,
}

fn put_config(w: &mut KvWriter, prefix: &str, c: &UNetConfig) {
    w.put(&format!("{prefix}.in_channels"), c.in_channels)
        .put(&format!("{prefix}.depth"), c.depth)
        .put(&format!("{prefix}.base_width"), c.base_width)
        .put(&format!("{prefix}.out_channels"), c.out_channels);
}

fn get_config(doc: &KvDoc, prefix: &str) -> Result<UNetConfig> {
    let c = UNetConfig {
        in_channels: doc.req(&format!("{prefix}.in_channels"))?,
        depth: doc.req(&format!("{prefix}.depth"))?,
        base_width: doc.req(&format!("{prefix}.base_width"))?,
        out_channels: doc.req(&format!("{prefix}.out_channels"))?,
    };
    c.validate().map_err(|e| doc.bad(e.to_string()))?;
    Ok(c)
}

impl Checkpoint {
    pub fn manifest_text(&self) -> String {
        let m = &self.model;
        let mut w = KvWriter::new();
        w.comment("two-stage precipitation retrieval checkpoint")
            .put("format", FORMAT)
            .put("version", VERSION)
            .put("stage", self.stage)
            .put("lineage", &self.lineage)
            .put("seed", self.seed)
            .put("steps", self.steps);
        match m.combine {
            CombineMode::Hard { threshold } => {
                w.put("combine", "hard").put("decision_threshold", threshold);
            }
            CombineMode::Soft => {
                w.put("combine", "soft");
            }
        }
        for (i, name) in m.input.channels.iter().enumerate() {
            w.put("input.channel", format!("{name}|{}|{}", m.input.mean[i], m.input.std[i]));
        }
        put_config(&mut w, "classifier", &m.classifier.config);
        put_config(&mut w, "regressor", &m.regressor.config);
        for (net, n) in [("classifier", &m.classifier), ("regressor", &m.regressor)] {
            for e in n.params.entries() {
                let shape: Vec<String> = e.shape.iter().map(|d| d.to_string()).collect();
                w.put("array", format!("{net}.{}|{}", e.name, shape.join(",")));
            }
        }
        w.finish()
    }

    fn params_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        m.classifier
            .params
            .values()
            .iter()
            .chain(m.regressor.params.values())
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    /// Writes `manifest.txt` and `params.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST), self.manifest_text().as_bytes())?;
        write_file(&dir.join(PARAMS), &self.params_bytes())
    }

    pub fn load(dir: &Path) -> Result<Checkpoint> {
        let mpath = dir.join(MANIFEST);
        let doc = KvDoc::read(&mpath)?;
        if doc.require("format")? != FORMAT {
            return Err(doc.bad("not a checkpoint manifest"));
        }
        let version: u32 = doc.req("version")?;
        if version != VERSION {
            return Err(doc.bad(format!("unsupported checkpoint version {version}")));
        }
        let stage: StageTag = doc.req("stage")?;
        let combine = match doc.require("combine")? {
            "hard" => CombineMode::Hard {
                threshold: doc.req("decision_threshold")?,
            },
            "soft" => CombineMode::Soft,
            other => return Err(doc.bad(format!("unknown combine mode `{other}`"))),
        };
        let mut input = InputSpec {
            channels: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
        };
        for line in doc.all("input.channel") {
            let parts: Vec<&str> = line.split('|').collect();
            if parts.len() != 3 {
                return Err(doc.bad(format!("bad input.channel `{line}`")));
            }
            input.channels.push(parts[0].to_string());
            input.mean.push(doc.parse_value("input.channel", parts[1])?);
            input.std.push(doc.parse_value("input.channel", parts[2])?);
        }
        let cc = get_config(&doc, "classifier")?;
        let rc = get_config(&doc, "regressor")?;

        let ppath = dir.join(PARAMS);
        let bytes = read_file(&ppath)?;
        let (nc, nr) = (cc.param_count(), rc.param_count());
        if bytes.len() != 4 * (nc + nr) {
            return Err(Error::format(
                &ppath,
                format!("{} bytes, expected {}", bytes.len(), 4 * (nc + nr)),
            ));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let bad = |e: Error| Error::format(&ppath, e.to_string());
        let classifier = Network::new(cc, ModelParams::from_values(&cc, values[..nc].to_vec()).map_err(bad)?)?;
        let regressor = Network::new(rc, ModelParams::from_values(&rc, values[nc..].to_vec()).map_err(bad)?)?;
        let model = TwoStageModel::new(classifier, regressor, input, combine).map_err(|e| doc.bad(e.to_string()))?;
        let ck = Checkpoint {
            stage,
            model,
            seed: doc.req("seed")?,
            steps: doc.req("steps")?,
            lineage: doc.require("lineage")?.to_string(),
        };
        let declared: Vec<&str> = doc.all("array").collect();
        let expected = ck.manifest_text();
        let expected: Vec<&str> = expected
            .lines()
            .filter_map(|l| l.strip_prefix("array = "))
            .collect();
        if declared != expected {
            return Err(doc.bad("array table does not match the network configuration"));
        }
        Ok(ck)
    }
}
