use std::str::FromStr;

/// `--sweep r,s:decades=3`: which quantization parameters to refine and over
/// how many decades.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub refine_r: bool,
    pub refine_s: bool,
    pub decades: u32,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (params, opts) = text.split_once(':').unwrap_or((text, ""));
        let mut spec = SweepSpec {
            refine_r: false,
            refine_s: false,
            decades: 3,
        };
        for p in params.split(',').map(str::trim) {
            match p {
                "r" => spec.refine_r = true,
                "s" => spec.refine_s = true,
                other => {
                    return Err(format!(
                        "unknown sweep parameter `{other}` (expected r and/or s)"
                    ))
                }
            }
        }
        for opt in opts.split(',').map(str::trim).filter(|o| !o.is_empty()) {
            match opt.split_once('=') {
                Some(("decades", v)) => {
                    spec.decades = v.parse().map_err(|_| format!("bad decade count `{v}`"))?;
                    if spec.decades == 0 {
                        return Err("decades must be at least 1".into());
                    }
                }
                _ => return Err(format!("unknown sweep option `{opt}`")),
            }
        }
        Ok(spec)
    }
}
