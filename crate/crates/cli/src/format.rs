/// `x` rounded to 9 significant digits, printed in its shortest form.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}
