//! Small helpers for validating hand-parsed JSON documents with field-level
//! error messages.

use serde_json::{Map, Value};

use crate::constellation::ComplexPoint;
use crate::error::{Error, Result};

pub(crate) type Object = Map<String, Value>;

pub(crate) fn join(path: &str, field: &str) -> String {
    format!("{path}.{field}")
}

pub(crate) fn object<'a>(value: &'a Value, path: &str) -> Result<&'a Object> {
    value
        .as_object()
        .ok_or_else(|| Error::schema(path, "expected a JSON object"))
}

pub(crate) fn field<'a>(obj: &'a Object, path: &str, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::schema(join(path, name), "missing field"))
}

pub(crate) fn str_field<'a>(obj: &'a Object, path: &str, name: &str) -> Result<&'a str> {
    field(obj, path, name)?
        .as_str()
        .ok_or_else(|| Error::schema(join(path, name), "expected a string"))
}

pub(crate) fn expect_type(obj: &Object, path: &str, want: &str) -> Result<()> {
    let got = str_field(obj, path, "type")?;
    if got != want {
        return Err(Error::schema(
            join(path, "type"),
            format!("expected \"{want}\", got \"{got}\""),
        ));
    }
    Ok(())
}

fn as_finite(value: &Value, path: &str) -> Result<f64> {
    let x = value
        .as_f64()
        .ok_or_else(|| Error::schema(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(Error::schema(path, "expected a finite number"));
    }
    Ok(x)
}

pub(crate) fn f64_field(obj: &Object, path: &str, name: &str) -> Result<f64> {
    as_finite(field(obj, path, name)?, &join(path, name))
}

pub(crate) fn f64_array(obj: &Object, path: &str, name: &str) -> Result<Vec<f64>> {
    let here = join(path, name);
    let arr = field(obj, path, name)?
        .as_array()
        .ok_or_else(|| Error::schema(&here, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| as_finite(v, &format!("{here}[{i}]")))
        .collect()
}

pub(crate) fn point_array(obj: &Object, path: &str, name: &str) -> Result<Vec<ComplexPoint>> {
    let here = join(path, name);
    let arr = field(obj, path, name)?
        .as_array()
        .ok_or_else(|| Error::schema(&here, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            let at = format!("{here}[{i}]");
            match v.as_array().map(Vec::as_slice) {
                Some([re, im]) => Ok(ComplexPoint::new(
                    as_finite(re, &format!("{at}[0]"))?,
                    as_finite(im, &format!("{at}[1]"))?,
                )),
                _ => Err(Error::schema(at, "expected a [re, im] pair")),
            }
        })
        .collect()
}
