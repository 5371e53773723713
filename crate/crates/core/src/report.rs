//! Number formatting shared by the JSON and CSV writers.
//!
//! Floats are written with 17 significant digits so every `f64` survives a
//! decimal round trip bit for bit.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// `x` with exactly 17 significant digits, positional when the exponent is
/// in `[-5, 17)`, otherwise in scientific notation. Non-finite values map to
/// `"inf"`, `"-inf"` and `"nan"`.
pub fn fmt_sig17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0.0000000000000000".into()
        } else {
            "0.0000000000000000".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        return sci;
    }
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut out = String::with_capacity(24);
    if negative {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        out.push_str(&digits[..int_len]);
        out.push('.');
        if int_len < digits.len() {
            out.push_str(&digits[int_len..]);
        } else {
            out.push('0');
        }
    }
    out
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        fmt_sig17(x)
    } else {
        format!("\"{}\"", fmt_sig17(x))
    };
    RawValue::from_string(text).expect("valid JSON number")
}

pub fn sig17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(*x).serialize(s)
}

pub fn sig17_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&x| raw(x)))
}
