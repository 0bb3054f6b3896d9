use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use num_rational::Ratio;
use ocq_core::lvalue::{
    bracket_by_stabilizations, interpolation_bracket, model_charpoly, stabilize as stabilize_form,
    symbolic_bracket_identity, triple_bracket, EulerFactors, FixtureBasis, SpanModel, TripleConfig,
};
use ocq_core::nearly::{hdagger as project, nabla_n_closed, nabla_s as fractional, twist_nearly};
use ocq_core::qexp::{delta_form, deplete, eisenstein_family, partial_s, twist_chi, u_op, v_op};
use ocq_core::spectral::{
    charpoly, check_fredholm_factorization, newton_polygon, riesz_projector, slope_factor,
    FilteredOperator,
};
use ocq_core::{Error, NearlyExp, PadicPoly, QExp, TameCharacter};
use serde_json::{json, Value};

use crate::context::{Context, PolyJson};

#[derive(Args, Debug)]
pub struct QexpArgs {
    /// Eisenstein family of weight `k + T`, constant term dropped.
    #[arg(long, conflicts_with_all = ["delta", "input"])]
    eisenstein: Option<i64>,
    #[arg(long, conflicts_with = "input")]
    delta: bool,
    /// q-expansion document, `-` for standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    u: bool,
    #[arg(long)]
    v: bool,
    #[arg(long)]
    deplete: bool,
    /// Twist by the tame character with this exponent.
    #[arg(long, allow_hyphen_values = true)]
    twist: Option<i64>,
    /// Apply `∂^s`: an integer, `k+cT`, or a weight document.
    #[arg(long = "partial-s", allow_hyphen_values = true)]
    partial_s: Option<String>,
    /// Emit a degree-zero nearly overconvergent document of this weight.
    #[arg(long = "as-nearly", allow_hyphen_values = true)]
    as_nearly: Option<String>,
}

#[derive(Args, Debug)]
pub struct NablaArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    times: u32,
}

#[derive(Args, Debug)]
pub struct NablaSArgs {
    #[arg(long)]
    input: PathBuf,
    /// An integer, `k+cT`, or a weight document.
    #[arg(long, allow_hyphen_values = true)]
    s: String,
}

#[derive(Args, Debug)]
pub struct HdaggerArgs {
    #[arg(long)]
    input: PathBuf,
    /// The weight `k` of the output; the input has weight `k + 2`.
    #[arg(long, allow_hyphen_values = true)]
    k: String,
}

#[derive(Args, Debug)]
pub struct TwistArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    chi: i64,
}

#[derive(Args, Debug)]
pub struct SpectralArgs {
    /// Matrix document.
    #[arg(long, conflicts_with = "poly")]
    input: Option<PathBuf>,
    /// Integer polynomial coefficients from the constant term up.
    #[arg(long, allow_hyphen_values = true)]
    poly: Option<String>,
    #[arg(long)]
    newton: bool,
    /// Factor at slope bound `h` (`a` or `a/b`).
    #[arg(long)]
    factor: Option<String>,
    /// Riesz projector onto slopes `≤ h`.
    #[arg(long)]
    projector: Option<String>,
    #[arg(long = "check-fredholm")]
    check_fredholm: bool,
}

#[derive(Args, Debug)]
pub struct StabilizeArgs {
    #[arg(long)]
    form: String,
}

#[derive(Args, Debug)]
pub struct EulerArgs {
    #[arg(long, conflicts_with_all = ["f", "g", "h"])]
    symbolic: bool,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long, default_value_t = 0)]
    t: u32,
}

#[derive(Args, Debug)]
pub struct TripleArgs {
    #[arg(long)]
    f: String,
    #[arg(long)]
    g: String,
    #[arg(long)]
    h: String,
    #[arg(long, default_value_t = 0)]
    t: u32,
    /// Slope bound (`a` or `a/b`); defaults to `k - 1`.
    #[arg(long)]
    slope: Option<String>,
    /// Use `g` itself instead of its depletion.
    #[arg(long = "no-deplete")]
    no_deplete: bool,
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable value")
}

fn ratio(s: &str) -> Result<Ratio<i64>> {
    let parse = |x: &str| {
        x.trim()
            .parse::<i64>()
            .map_err(|_| Error::InvalidInput(format!("bad rational {s:?}")))
    };
    let r = match s.split_once('/') {
        Some((a, b)) => {
            let b = parse(b)?;
            if b == 0 {
                bail!(Error::InvalidInput(format!("zero denominator in {s:?}")));
            }
            Ratio::new(parse(a)?, b)
        }
        None => Ratio::from_integer(parse(s)?),
    };
    Ok(r)
}

pub fn qexp(ctx: &Context, a: &QexpArgs) -> Result<Value> {
    let mut f: QExp = if let Some(k) = a.eisenstein {
        eisenstein_family(&ctx.family_weight(k, 1), ctx.q)?
    } else if a.delta {
        delta_form(ctx.p, ctx.n, ctx.m, ctx.q)
    } else if let Some(path) = &a.input {
        ctx.read_qexp(path)?
    } else {
        bail!(Error::InvalidInput(
            "one of --eisenstein, --delta, --input is required".into()
        ));
    };
    if a.u {
        f = u_op(&f);
    }
    if a.v {
        f = v_op(&f);
    }
    if a.deplete {
        f = deplete(&f);
    }
    if let Some(i) = a.twist {
        f = twist_chi(&f, &TameCharacter::new(ctx.p, i));
    }
    if let Some(s) = &a.partial_s {
        f = partial_s(&f, &ctx.weight_arg(s)?, 0)?;
    }
    if let Some(k) = &a.as_nearly {
        let w = NearlyExp::from_qexp(ctx.weight_arg(k)?, ctx.lift(&f));
        return Ok(to_value(&ctx.nearly_doc(&w)));
    }
    Ok(to_value(&ctx.qexp_doc(&f)))
}

pub fn nabla(ctx: &Context, a: &NablaArgs) -> Result<Value> {
    let w = ctx.read_nearly(&a.input)?;
    Ok(to_value(&ctx.nearly_doc(&nabla_n_closed(&w, a.times))))
}

pub fn nabla_s(ctx: &Context, a: &NablaSArgs) -> Result<Value> {
    let w = ctx.read_nearly(&a.input)?;
    let s = ctx.weight_arg(&a.s)?;
    let it = fractional(&w, &s, ctx.j, ctx.floor)?;
    let mut doc = ctx.nearly_doc(&it.value);
    doc.meta = Some(json!({
        "tail_order": ctx.j,
        "achieved": it.achieved,
        "term_valuations": it.term_valuations,
        "assumption": it.report,
    }));
    Ok(to_value(&doc))
}

pub fn hdagger(ctx: &Context, a: &HdaggerArgs) -> Result<Value> {
    let w = ctx.read_nearly(&a.input)?;
    let k = ctx.weight_arg(&a.k)?;
    let out = project(&w, &k, ctx.floor)?;
    let mut doc = ctx.qexp_doc(&out.form);
    doc.meta = Some(json!({ "precision_loss": out.precision_loss }));
    Ok(to_value(&doc))
}

pub fn twist(ctx: &Context, a: &TwistArgs) -> Result<Value> {
    let w = ctx.read_nearly(&a.input)?;
    let chi = TameCharacter::new(ctx.p, a.chi);
    Ok(to_value(&ctx.nearly_doc(&twist_nearly(&w, &chi))))
}

fn integer_poly(ctx: &Context, s: &str) -> Result<PadicPoly> {
    let xs = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<i128>()
                .map_err(|_| Error::InvalidInput(format!("bad coefficient {x:?}")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PadicPoly::from_ints(ctx.p, ctx.n, &xs))
}

pub fn spectral(ctx: &Context, a: &SpectralArgs) -> Result<Value> {
    let matrix = a
        .input
        .as_ref()
        .map(|path| ctx.read_matrix(path))
        .transpose()?;
    let poly = match (&a.poly, &matrix) {
        (Some(s), _) => integer_poly(ctx, s)?,
        (None, Some((m, _))) => {
            if !m.is_square() {
                bail!(Error::InvalidInput("matrix is not square".into()));
            }
            charpoly(m)
        }
        (None, None) => bail!(Error::InvalidInput(
            "one of --input, --poly is required".into()
        )),
    };
    let mut out = json!({ "poly": PolyJson::of(ctx.p, &poly) });
    if a.newton {
        let segments: Vec<Value> = newton_polygon(&poly)
            .into_iter()
            .map(|(slope, len)| json!({ "slope": slope, "length": len }))
            .collect();
        out["newton"] = json!(segments);
    }
    if let Some(h) = &a.factor {
        let (le, gt) = slope_factor(&poly, ratio(h)?)?;
        out["factor"] = json!({
            "slope_bound": h,
            "at_most": PolyJson::of(ctx.p, &le),
            "above": PolyJson::of(ctx.p, &gt),
        });
    }
    if let Some(h) = &a.projector {
        let Some((m, _)) = &matrix else {
            bail!(Error::InvalidInput(
                "--projector needs a matrix --input".into()
            ));
        };
        out["projector"] = to_value(&riesz_projector(m, ratio(h)?)?.to_json(None));
    }
    if a.check_fredholm {
        let Some((m, Some(blocks))) = &matrix else {
            bail!(Error::InvalidInput(
                "--check-fredholm needs a matrix with block sizes".into()
            ));
        };
        if blocks.iter().sum::<usize>() != m.rows() {
            bail!(Error::Malformed(
                "block sizes do not sum to the matrix size".into()
            ));
        }
        let op = FilteredOperator {
            matrix: m.clone(),
            blocks: blocks.clone(),
            label: "input".into(),
        };
        out["fredholm"] = to_value(&check_fredholm_factorization(&op));
    }
    Ok(out)
}

pub fn stabilize(ctx: &Context, a: &StabilizeArgs) -> Result<Value> {
    let label = &a.form;
    let f = ctx.form(label)?;
    let pair = stabilize_form(&f, ctx.n, ctx.q)?;
    Ok(json!({
        "form": f.to_json(),
        "alpha": pair.alpha.serialize_repr(),
        "beta": pair.beta.serialize_repr(),
        "f_alpha": ctx.qexp_doc(&pair.f_alpha),
        "f_beta": ctx.qexp_doc(&pair.f_beta),
    }))
}

pub fn euler(ctx: &Context, a: &EulerArgs) -> Result<Value> {
    if a.symbolic {
        let check = symbolic_bracket_identity()?;
        let verdict = if check.holds { "holds" } else { "fails" };
        return Ok(json!({ "verdict": verdict, "check": check }));
    }
    let (Some(f), Some(g), Some(h)) = (&a.f, &a.g, &a.h) else {
        bail!(Error::InvalidInput(
            "either --symbolic or all of --f --g --h".into()
        ));
    };
    let e = EulerFactors::at_point(&ctx.form(f)?, &ctx.form(g)?, &ctx.form(h)?, a.t)?;
    let bracket = interpolation_bracket(&e)?;
    let by_stab = bracket_by_stabilizations(&e)?;
    Ok(json!({
        "bracket": bracket.serialize_repr(),
        "by_stabilizations": by_stab.serialize_repr(),
        "agree": bracket == by_stab,
    }))
}

pub fn triple(ctx: &Context, a: &TripleArgs) -> Result<Value> {
    let (f, g, h) = (ctx.form(&a.f)?, ctx.form(&a.g)?, ctx.form(&a.h)?);
    let basis = if ctx.p == 2 {
        FixtureBasis::level_four(&f, ctx.n, ctx.q)?
    } else {
        FixtureBasis::old_space(&f, ctx.n, ctx.q, 2)?
    };
    let model = SpanModel::new(basis).map_err(|e| e.at_stage("model"))?;
    let slope = match &a.slope {
        Some(s) => ratio(s)?,
        None => Ratio::from_integer(f.weight as i64 - 1),
    };
    let cfg = TripleConfig {
        t: a.t,
        slope,
        floor: ctx.floor,
        deplete: !a.no_deplete,
    };
    let out = triple_bracket(&f, &g, &h, &model, &cfg)?;
    Ok(json!({
        "value": out.value.serialize_repr(),
        "coordinates": out.coordinates.iter().map(|x| x.serialize_repr()).collect::<Vec<_>>(),
        "basis": model.basis.labels,
        "charpoly": PolyJson::of(ctx.p, &model_charpoly(&model)),
        "stage_log": out.stage_log,
    }))
}
