use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use ocq_core::lvalue::{EigenformData, EigenformJson};
use ocq_core::nearly::{default_tail_order, NearlyJson};
use ocq_core::padic::{check_params, ScalarJson};
use ocq_core::qexp::QExpJson;
use ocq_core::ring::WeightJson;
use ocq_core::spectral::MatrixJson;
use ocq_core::{Error, FamilyElement, Matrix, NearlyExp, PadicPoly, QExp, Weight};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Shared parameters every object of one invocation is validated against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub p: u32,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub floor: i64,
    pub seed: u64,
    #[serde(skip)]
    pub fixtures: Option<PathBuf>,
}

impl Context {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: u32,
        n: u32,
        m: usize,
        q: usize,
        j: Option<usize>,
        floor: Option<i64>,
        seed: u64,
        fixtures: Option<PathBuf>,
    ) -> Result<Self> {
        check_params(p, n).map_err(|e| Error::Malformed(e.to_string()))?;
        if m == 0 {
            return Err(Error::Malformed("family truncation M must be positive".into()).into());
        }
        Ok(Context {
            p,
            n,
            m,
            q,
            j: j.unwrap_or_else(|| default_tail_order(p)),
            floor: floor.unwrap_or(n.div_ceil(2) as i64),
            seed,
            fixtures,
        })
    }

    pub fn integer_weight(&self, k: i64) -> Weight {
        Weight::integer(self.p, self.n, self.m, k)
    }

    /// An integer `k`, a family `k+cT` (tame part `k`, `u = k + cT`), or a path to a
    /// weight JSON document.
    pub fn weight_arg(&self, arg: &str) -> Result<Weight> {
        let text = arg.trim();
        if let Ok(k) = text.parse::<i64>() {
            return Ok(self.integer_weight(k));
        }
        if let Some((k, c)) = parse_family_weight(text) {
            return Ok(self.family_weight(k, c));
        }
        let j: WeightJson = read_json(Path::new(arg))?;
        let w = Weight::from_json(&j)?;
        self.check_weight(&w)?;
        Ok(w)
    }

    pub fn family_weight(&self, k: i64, c: i64) -> Weight {
        let t = FamilyElement::variable(self.p, self.n, self.m).mul_int(c as i128);
        Weight::new(k, t.add_int(k as i128))
    }

    pub fn check_weight(&self, w: &Weight) -> Result<()> {
        if w.p() != self.p || w.n() != self.n || w.m() != self.m {
            return Err(Error::ContextMismatch(format!(
                "weight over (p, N, M) = ({}, {}, {}) in context ({}, {}, {})",
                w.p(),
                w.n(),
                w.m(),
                self.p,
                self.n,
                self.m
            ))
            .into());
        }
        Ok(())
    }

    pub fn read_qexp(&self, path: &Path) -> Result<QExp> {
        let doc: QExpDoc = read_json(path)?;
        self.check_doc(&doc.context)?;
        Ok(QExp::from_json(self.p, self.n, &doc.qexp)?)
    }

    pub fn read_nearly(&self, path: &Path) -> Result<NearlyExp> {
        let doc: NearlyDoc = read_json(path)?;
        self.check_doc(&doc.context)?;
        let w = NearlyExp::from_json(&doc.nearly)?;
        self.check_weight(w.weight())?;
        Ok(w)
    }

    pub fn read_matrix(&self, path: &Path) -> Result<(Matrix, Option<Vec<usize>>)> {
        let j: MatrixJson = read_json(path)?;
        if j.p != self.p {
            return Err(Error::ContextMismatch(format!(
                "matrix over p = {} in context p = {}",
                j.p, self.p
            ))
            .into());
        }
        let blocks = j.blocks.clone();
        Ok((Matrix::from_json(&j)?, blocks))
    }

    fn check_doc(&self, c: &DocContext) -> Result<()> {
        if c.p != self.p || c.n != self.n || c.m != self.m {
            return Err(Error::ContextMismatch(format!(
                "document over (p, N, M) = ({}, {}, {}) in context ({}, {}, {})",
                c.p, c.n, c.m, self.p, self.n, self.m
            ))
            .into());
        }
        Ok(())
    }

    pub fn doc_context(&self) -> DocContext {
        DocContext {
            p: self.p,
            n: self.n,
            m: self.m,
        }
    }

    pub fn qexp_doc(&self, f: &QExp) -> QExpDoc {
        QExpDoc {
            context: self.doc_context(),
            qexp: self.lift(f).to_json(),
            meta: None,
        }
    }

    /// Embeds a classical expansion into the family ring of the context.
    pub fn lift(&self, f: &QExp) -> QExp {
        if f.m() == self.m {
            return f.clone();
        }
        QExp::from_coeffs(
            f.coeffs()
                .iter()
                .map(|c| FamilyElement::constant(c.constant_term(), self.n, self.m))
                .collect(),
        )
    }

    fn fixture(&self, label: &str) -> Result<Option<EigenformJson>> {
        let Some(path) = &self.fixtures else {
            return Ok(None);
        };
        if path.is_dir() {
            let file = path.join(format!("{label}.json"));
            return if file.exists() {
                Ok(Some(read_json(&file)?))
            } else {
                Ok(None)
            };
        }
        let mut table: BTreeMap<String, EigenformJson> = read_json(path)?;
        Ok(table.remove(label))
    }

    pub fn nearly_doc(&self, w: &NearlyExp) -> NearlyDoc {
        NearlyDoc {
            context: self.doc_context(),
            nearly: w.to_json(),
            meta: None,
        }
    }

    /// `E<k>`, `Delta`, or a fixture label. Fixtures are either a JSON file mapping labels
    /// to eigenform documents or a directory of `<label>.json` files.
    pub fn form(&self, label: &str) -> Result<EigenformData> {
        if let Some(j) = self.fixture(label)? {
            return Ok(EigenformData::from_json(self.p, self.n, &j)?);
        }
        if label.eq_ignore_ascii_case("delta") {
            return Ok(EigenformData::delta(self.p, self.n));
        }
        if let Some(k) = label.strip_prefix('E').and_then(|k| k.parse::<u32>().ok()) {
            if k >= 4 && k % 2 == 0 {
                return Ok(EigenformData::eisenstein(self.p, self.n, k));
            }
        }
        Err(Error::InvalidInput(format!(
            "unknown form {label:?}; use E<k>, Delta or a fixture label"
        ))
        .into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocContext {
    pub p: u32,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QExpDoc {
    pub context: DocContext,
    pub qexp: QExpJson,
    /// Diagnostics attached by the producing command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearlyDoc {
    pub context: DocContext,
    pub nearly: NearlyJson,
    /// Diagnostics attached by the producing command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

/// Coefficients from the constant term up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyJson {
    pub p: u32,
    pub coeffs: Vec<ScalarJson>,
}

impl PolyJson {
    pub fn of(p: u32, f: &PadicPoly) -> Self {
        PolyJson {
            p,
            coeffs: f.coeffs().iter().map(|c| c.serialize_repr()).collect(),
        }
    }
}

fn parse_family_weight(text: &str) -> Option<(i64, i64)> {
    let body = text.strip_suffix('T')?;
    let split = body.rfind(['+', '-']).filter(|&i| i > 0)?;
    let k = body[..split].parse().ok()?;
    let c = match &body[split..] {
        "+" => 1,
        "-" => -1,
        c => c.trim_start_matches('+').parse().ok()?,
    };
    Some((k, c))
}

/// Reads JSON from a file, or from standard input when the path is `-`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading standard input")?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())).into())
}
