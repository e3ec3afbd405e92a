//! JSON model files.
//!
//! ```json
//! {
//!   "variables":  [{"name": "T", "domain": ["0", "1"]}, ...],
//!   "exogenous":  [{"name": "e", "domain": ["0", "1"], "probs": [0.5, 0.5]}, ...],
//!   "mechanisms": {"Y": {"parents": ["T"], "exo": ["e"], "table": {"0,1": "1", ...}}},
//!   "roles":      {"action": "T", "context": [], "outcomes": ["Y"]},
//!   "default_policy": {"parents": [], "exo": null, "table": {"": "0"}},
//!   "utility":    {"0||1": 1.0, ...},
//!   "objective":  {...}
//! }
//! ```
//!
//! Table keys join the labels of the parents and then the exogenous inputs
//! with `,`. Utility keys are `action|context|outcome`, with the context and
//! outcome labels comma-joined in role order. The action's mechanism lives
//! in `default_policy`, not in `mechanisms`. Errors carry the JSON pointer of
//! the offending element.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::harm::{Objective, TableShape, UtilityTable};
use crate::scm::{product_space, DiscreteScm, ScmBuilder};

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub scm: DiscreteScm,
    pub utility: UtilityTable,
    pub objective: Option<Objective>,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    parse_model(&fs::read_to_string(path)?)
}

pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let v: Value = serde_json::from_str(text)?;
    model_from_value(&v)
}

fn obj<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::schema(path, "expected an object"))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    m.get(key)
        .ok_or_else(|| Error::schema(path, format!("missing key `{key}`")))
}

fn arr<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::schema(path, "expected an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::schema(path, "expected a string"))
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>> {
    arr(v, path)?
        .iter()
        .enumerate()
        .map(|(i, s)| string(s, &format!("{path}/{i}")).map(str::to_string))
        .collect()
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::schema(path, "expected a finite number"))
}

/// Escapes `~` and `/` for use inside a JSON pointer.
fn esc(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}

fn check_label(label: &str, path: &str) -> Result<()> {
    if label.contains(',') || label.contains('|') {
        return Err(Error::schema(path, format!("label `{label}` may not contain `,` or `|`")));
    }
    Ok(())
}

fn with_path(e: Error, path: &str) -> Error {
    match e {
        Error::Schema { .. } | Error::Cycle(_) | Error::MissingTableEntry { .. } => e,
        other => Error::schema(path, other.to_string()),
    }
}

struct MechSpec {
    parents: Vec<String>,
    exo: Vec<String>,
    table: Map<String, Value>,
    path: String,
}

fn parse_mechanism(v: &Value, path: &str) -> Result<MechSpec> {
    let m = obj(v, path)?;
    let parents = match m.get("parents") {
        None | Some(Value::Null) => Vec::new(),
        Some(p) => strings(p, &format!("{path}/parents"))?,
    };
    let exo = match m.get("exo") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::String(s)) => vec![s.clone()],
        Some(e) => strings(e, &format!("{path}/exo"))?,
    };
    let table = obj(field(m, "table", path)?, &format!("{path}/table"))?.clone();
    Ok(MechSpec {
        parents,
        exo,
        table,
        path: path.to_string(),
    })
}

fn install(b: &mut ScmBuilder, var: &str, spec: &MechSpec) -> Result<()> {
    let parents: Vec<&str> = spec.parents.iter().map(String::as_str).collect();
    let exo: Vec<&str> = spec.exo.iter().map(String::as_str).collect();
    let domains = b
        .input_domains(&parents, &exo)
        .map_err(|e| with_path(e, &spec.path))?;
    let out_dom = b.domain_of(var)?.to_vec();
    let radix: Vec<usize> = domains.iter().map(Vec::len).collect();
    let mut seen = HashSet::new();
    let mut table = Vec::new();
    for inp in product_space(&radix) {
        let key = inp
            .iter()
            .zip(&domains)
            .map(|(&i, d)| d[i].as_str())
            .collect::<Vec<_>>()
            .join(",");
        let entry = spec.table.get(&key).ok_or_else(|| Error::MissingTableEntry {
            var: var.to_string(),
            key: key.clone(),
        })?;
        let p = format!("{}/table/{}", spec.path, esc(&key));
        let label = string(entry, &p)?;
        let idx = out_dom
            .iter()
            .position(|d| d == label)
            .ok_or_else(|| Error::schema(&p, format!("`{label}` is not in the domain of `{var}`")))?;
        table.push(idx);
        seen.insert(key);
    }
    if let Some(extra) = spec.table.keys().find(|k| !seen.contains(*k)) {
        return Err(Error::schema(
            format!("{}/table/{}", spec.path, esc(extra)),
            "key does not match any input combination",
        ));
    }
    b.table(var, &parents, &exo, table)
        .map_err(|e| with_path(e, &spec.path))?;
    Ok(())
}

fn parse_table(scm: &DiscreteScm, v: &Value, path: &str) -> Result<UtilityTable> {
    let m = obj(v, path)?;
    let roles = scm.roles();
    let shape = TableShape::of(scm);
    let mut values = vec![0.0; shape.len()];
    let mut seen = HashSet::new();
    for a in 0..shape.actions {
        for x in product_space(&shape.context_radix) {
            for y in product_space(&shape.outcome_radix) {
                let key = format!(
                    "{}|{}|{}",
                    scm.action_label(a),
                    scm.labels(&roles.context, &x).join(","),
                    scm.labels(&roles.outcomes, &y).join(",")
                );
                let val = m
                    .get(&key)
                    .ok_or_else(|| Error::schema(path, format!("missing entry `{key}`")))?;
                values[shape.index(a, &x, &y)] = number(val, &format!("{path}/{}", esc(&key)))?;
                seen.insert(key);
            }
        }
    }
    if let Some(extra) = m.keys().find(|k| !seen.contains(*k)) {
        return Err(Error::schema(
            format!("{path}/{}", esc(extra)),
            "key does not match any (action, context, outcome)",
        ));
    }
    UtilityTable::from_values(shape, values)
}

pub fn model_from_value(v: &Value) -> Result<LoadedModel> {
    let root = obj(v, "")?;
    let mut b = ScmBuilder::new();

    let vars = arr(field(root, "variables", "")?, "/variables")?;
    let mut names = Vec::new();
    for (i, var) in vars.iter().enumerate() {
        let p = format!("/variables/{i}");
        let m = obj(var, &p)?;
        let name = string(field(m, "name", &p)?, &format!("{p}/name"))?;
        let domain = strings(field(m, "domain", &p)?, &format!("{p}/domain"))?;
        for (k, d) in domain.iter().enumerate() {
            check_label(d, &format!("{p}/domain/{k}"))?;
        }
        b.endogenous(name, domain).map_err(|e| with_path(e, &p))?;
        names.push(name.to_string());
    }

    let exos = arr(field(root, "exogenous", "")?, "/exogenous")?;
    for (i, e) in exos.iter().enumerate() {
        let p = format!("/exogenous/{i}");
        let m = obj(e, &p)?;
        let name = string(field(m, "name", &p)?, &format!("{p}/name"))?;
        let domain = strings(field(m, "domain", &p)?, &format!("{p}/domain"))?;
        for (k, d) in domain.iter().enumerate() {
            check_label(d, &format!("{p}/domain/{k}"))?;
        }
        let probs_v = arr(field(m, "probs", &p)?, &format!("{p}/probs"))?;
        let probs = probs_v
            .iter()
            .enumerate()
            .map(|(k, x)| number(x, &format!("{p}/probs/{k}")))
            .collect::<Result<Vec<_>>>()?;
        b.exogenous(name, domain, &probs).map_err(|e| with_path(e, &p))?;
    }

    let roles = obj(field(root, "roles", "")?, "/roles")?;
    let action = string(field(roles, "action", "/roles")?, "/roles/action")?.to_string();
    let context = match roles.get("context") {
        None | Some(Value::Null) => Vec::new(),
        Some(c) => strings(c, "/roles/context")?,
    };
    let outcomes = strings(field(roles, "outcomes", "/roles")?, "/roles/outcomes")?;
    if !names.contains(&action) {
        return Err(Error::schema("/roles/action", format!("unknown variable `{action}`")));
    }

    let mechs = obj(field(root, "mechanisms", "")?, "/mechanisms")?;
    if mechs.contains_key(&action) {
        return Err(Error::schema(
            format!("/mechanisms/{}", esc(&action)),
            "the action's mechanism belongs in `default_policy`",
        ));
    }
    if let Some(unknown) = mechs.keys().find(|k| !names.contains(k)) {
        return Err(Error::schema(
            format!("/mechanisms/{}", esc(unknown)),
            format!("unknown variable `{unknown}`"),
        ));
    }
    for name in &names {
        let spec = if *name == action {
            parse_mechanism(field(root, "default_policy", "")?, "/default_policy")?
        } else {
            let p = format!("/mechanisms/{}", esc(name));
            parse_mechanism(field(mechs, name, "/mechanisms")?, &p)?
        };
        install(&mut b, name, &spec)?;
    }

    let ctx: Vec<&str> = context.iter().map(String::as_str).collect();
    let out: Vec<&str> = outcomes.iter().map(String::as_str).collect();
    b.roles(&action, &ctx, &out);
    let scm = b.build().map_err(|e| match e {
        Error::Roles(_) => with_path(e, "/roles"),
        other => other,
    })?;

    let utility = parse_table(&scm, field(root, "utility", "")?, "/utility")?;
    let objective = match root.get("objective") {
        None | Some(Value::Null) => None,
        Some(o) => Some(Objective::new(parse_table(&scm, o, "/objective")?)),
    };
    Ok(LoadedModel {
        scm,
        utility,
        objective,
    })
}

fn export_mechanism(scm: &DiscreteScm, var: usize) -> Value {
    let m = scm.mechanism(var);
    let vars = scm.variables();
    let exos = scm.exogenous();
    let domains: Vec<&Vec<String>> = m
        .parents
        .iter()
        .map(|&p| &vars[p].domain)
        .chain(m.exo.iter().map(|&e| &exos[e].domain))
        .collect();
    let radix: Vec<usize> = domains.iter().map(|d| d.len()).collect();
    let mut table = Map::new();
    for (inp, &out) in product_space(&radix).iter().zip(&m.table) {
        let key = inp
            .iter()
            .zip(&domains)
            .map(|(&i, d)| d[i].as_str())
            .collect::<Vec<_>>()
            .join(",");
        table.insert(key, json!(vars[var].domain[out]));
    }
    json!({
        "parents": m.parents.iter().map(|&p| vars[p].name.clone()).collect::<Vec<_>>(),
        "exo": m.exo.iter().map(|&e| exos[e].name.clone()).collect::<Vec<_>>(),
        "table": table,
    })
}

fn export_table(scm: &DiscreteScm, table: &UtilityTable) -> Value {
    let roles = scm.roles();
    let shape = table.shape();
    let mut out = BTreeMap::new();
    for a in 0..shape.actions {
        for x in product_space(&shape.context_radix) {
            for y in product_space(&shape.outcome_radix) {
                let key = format!(
                    "{}|{}|{}",
                    scm.action_label(a),
                    scm.labels(&roles.context, &x).join(","),
                    scm.labels(&roles.outcomes, &y).join(",")
                );
                out.insert(key, json!(table.get(a, &x, &y)));
            }
        }
    }
    json!(out)
}

/// The model as a JSON document that [`model_from_value`] accepts.
pub fn export_model(scm: &DiscreteScm, utility: &UtilityTable, objective: Option<&Objective>) -> Value {
    let vars = scm.variables();
    let roles = scm.roles();
    let names = |idx: &[usize]| idx.iter().map(|&i| vars[i].name.clone()).collect::<Vec<_>>();
    let mut mechanisms = Map::new();
    for (i, v) in vars.iter().enumerate() {
        if i != roles.action {
            mechanisms.insert(v.name.clone(), export_mechanism(scm, i));
        }
    }
    let mut doc = json!({
        "variables": vars.iter().map(|v| json!({"name": v.name, "domain": v.domain})).collect::<Vec<_>>(),
        "exogenous": scm.exogenous().iter().map(|e| json!({"name": e.name, "domain": e.domain, "probs": e.probs})).collect::<Vec<_>>(),
        "mechanisms": mechanisms,
        "roles": {
            "action": vars[roles.action].name,
            "context": names(&roles.context),
            "outcomes": names(&roles.outcomes),
        },
        "default_policy": export_mechanism(scm, roles.action),
        "utility": export_table(scm, utility),
    });
    if let Some(o) = objective {
        doc["objective"] = export_table(scm, o.table());
    }
    doc
}

pub fn save_model(
    path: impl AsRef<Path>,
    scm: &DiscreteScm,
    utility: &UtilityTable,
    objective: Option<&Objective>,
) -> Result<()> {
    let text = serde_json::to_string_pretty(&export_model(scm, utility, objective))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
