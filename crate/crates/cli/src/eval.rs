//! The `eval` subcommand: symbolic product evaluation with exact rational
//! output whenever every input literal is rational.

use serde::Deserialize;
use std::path::Path;
use std::process::ExitCode;
use vortex_core::functionals::{FunctionalError, FunctionalSpec};
use vortex_core::products::{ProductContext, ProductError};
use vortex_core::scalar::{format_exact, CExact, Scalar, C64};
use vortex_core::word::parse_polynomial;
use vortex_core::{FunctionalPair, FunctionalTriple, Polynomial};

/// Per-family functional slots; which ones are required depends on the mode.
#[derive(Deserialize, Debug)]
struct FamilySpec {
    family: u32,
    #[serde(default)]
    psi: Option<FunctionalSpec>,
    #[serde(default)]
    phi: Option<FunctionalSpec>,
    #[serde(default)]
    omega: Option<FunctionalSpec>,
    #[serde(default)]
    theta: Option<FunctionalSpec>,
}

#[derive(Deserialize, Debug)]
struct EvalSpec {
    families: Vec<FamilySpec>,
}

pub fn cmd_eval(word: &str, mode: &str, spec_path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", spec_path.display());
            return ExitCode::from(2);
        }
    };
    let spec: EvalSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", spec_path.display());
            return ExitCode::from(2);
        }
    };
    let rational = spec.families.iter().all(|f| {
        [&f.psi, &f.phi, &f.omega, &f.theta]
            .into_iter()
            .flatten()
            .all(FunctionalSpec::is_rational)
    });
    if rational {
        run_eval::<CExact>(word, mode, &spec, |v| format_exact(v))
    } else {
        run_eval::<C64>(word, mode, &spec, |v| {
            if v.im == 0.0 {
                format!("{:.14e}", v.re)
            } else {
                format!("{:.14e} + {:.14e}i", v.re, v.im)
            }
        })
    }
}

fn run_eval<S: Scalar>(
    word: &str,
    mode: &str,
    spec: &EvalSpec,
    render: impl Fn(&S) -> String,
) -> ExitCode {
    let poly: Polynomial<S> = match parse_polynomial(word) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match evaluate(mode, spec, &poly) {
        Ok(values) => {
            for (name, v) in values {
                println!("{name} = {}", render(&v));
            }
            ExitCode::SUCCESS
        }
        Err(EvalError::Spec(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(EvalError::Rule(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

enum EvalError {
    /// Malformed input: exit 2.
    Spec(String),
    /// A product-rule violation: exit 3.
    Rule(String),
}

impl From<ProductError> for EvalError {
    fn from(e: ProductError) -> Self {
        match e {
            ProductError::OmegaUnitMismatch | ProductError::UnregisteredFamily(_) => {
                EvalError::Rule(e.to_string())
            }
            other => EvalError::Spec(other.to_string()),
        }
    }
}

impl From<FunctionalError> for EvalError {
    fn from(e: FunctionalError) -> Self {
        EvalError::Spec(e.to_string())
    }
}

fn need<'a>(
    slot: &'a Option<FunctionalSpec>,
    name: &str,
    family: u32,
) -> Result<&'a FunctionalSpec, EvalError> {
    slot.as_ref().ok_or_else(|| {
        EvalError::Spec(format!("family {family} is missing the `{name}` functional"))
    })
}

type Values<S> = Vec<(&'static str, S)>;

fn evaluate<S: Scalar>(
    mode: &str,
    spec: &EvalSpec,
    poly: &Polynomial<S>,
) -> Result<Values<S>, EvalError> {
    if spec.families.is_empty() {
        return Err(EvalError::Spec("spec registers no families".into()));
    }
    let two = |ctx_name: &str| -> Result<(), EvalError> {
        if spec.families.len() == 2 {
            Ok(())
        } else {
            Err(EvalError::Spec(format!("{ctx_name} mode needs exactly two families")))
        }
    };
    match mode {
        "free" => {
            let psis = spec
                .families
                .iter()
                .map(|f| Ok(need(&f.psi, "psi", f.family)?.build::<S>(f.family)?))
                .collect::<Result<Vec<_>, EvalError>>()?;
            let ctx = ProductContext::free(psis)?;
            let v = ctx.eval_component_checked(poly)?;
            Ok(vec![("psi", v)])
        }
        "cfree" => {
            let pairs = spec
                .families
                .iter()
                .map(|f| {
                    let phi = need(&f.phi, "phi", f.family)?.build::<S>(f.family)?;
                    let psi = need(&f.psi, "psi", f.family)?.build::<S>(f.family)?;
                    FunctionalPair::new(phi, psi).map_err(EvalError::from)
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            let ctx = ProductContext::cfree(pairs)?;
            let mut psi = S::zero();
            let mut phi = S::zero();
            for (w, c) in poly.terms() {
                let (p, f) = ctx.cfree_product_eval(w)?;
                psi = psi + c.clone() * p;
                phi = phi + c.clone() * f;
            }
            Ok(vec![("psi", psi), ("phi", phi)])
        }
        "cyclic" => {
            let triples = spec
                .families
                .iter()
                .map(|f| {
                    let psi = need(&f.psi, "psi", f.family)?.build::<S>(f.family)?;
                    let phi = need(&f.phi, "phi", f.family)?.build::<S>(f.family)?;
                    let omega = need(&f.omega, "omega", f.family)?.build::<S>(f.family)?;
                    FunctionalTriple::new(psi, phi, omega).map_err(EvalError::from)
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            let ctx = ProductContext::cyclic(triples)?;
            let v = ctx.eval_poly(vortex_core::products::Component::Omega, poly)?;
            Ok(vec![("omega", v)])
        }
        "ordered" => {
            two("ordered")?;
            let mut pairs = spec.families.iter().map(|f| {
                let phi = need(&f.phi, "phi", f.family)?.build::<S>(f.family)?;
                let psi = need(&f.psi, "psi", f.family)?.build::<S>(f.family)?;
                FunctionalPair::new(phi, psi).map_err(EvalError::from)
            });
            let left = pairs.next().unwrap()?;
            let right = pairs.next().unwrap()?;
            let ctx = ProductContext::ordered(left, right)?;
            let mut phi = S::zero();
            let mut psi = S::zero();
            for (w, c) in poly.terms() {
                let (f, p) = ctx.ordered_product_eval(w)?;
                phi = phi + c.clone() * f;
                psi = psi + c.clone() * p;
            }
            Ok(vec![("phi", phi), ("psi", psi)])
        }
        "indented" => {
            two("indented")?;
            let mut triples = spec.families.iter().map(|f| {
                Ok::<_, EvalError>((
                    need(&f.phi, "phi", f.family)?.build::<S>(f.family)?,
                    need(&f.psi, "psi", f.family)?.build::<S>(f.family)?,
                    need(&f.theta, "theta", f.family)?.build::<S>(f.family)?,
                ))
            });
            let left = triples.next().unwrap()?;
            let right = triples.next().unwrap()?;
            let ctx = ProductContext::indented(left, right)?;
            let mut out = [S::zero(), S::zero(), S::zero()];
            for (w, c) in poly.terms() {
                let (f, p, t) = ctx.indented_product_eval(w)?;
                out[0] = out[0].clone() + c.clone() * f;
                out[1] = out[1].clone() + c.clone() * p;
                out[2] = out[2].clone() + c.clone() * t;
            }
            let [phi, psi, theta] = out;
            Ok(vec![("phi", phi), ("psi", psi), ("theta", theta)])
        }
        other => Err(EvalError::Spec(format!(
            "unknown mode `{other}` (free | cfree | cyclic | ordered | indented)"
        ))),
    }
}

/// Free-mode polynomial evaluation (helper so the trait stays out of main).
trait FreeEval<S: Scalar> {
    fn eval_component_checked(&self, poly: &Polynomial<S>) -> Result<S, ProductError>;
}

impl<S: Scalar> FreeEval<S> for ProductContext<S> {
    fn eval_component_checked(&self, poly: &Polynomial<S>) -> Result<S, ProductError> {
        let mut acc = S::zero();
        for (w, c) in poly.terms() {
            acc = acc + c.clone() * self.free_product_eval(w)?;
        }
        Ok(acc)
    }
}
