//! Parsers for the compact flag grammars.

use kronpcg::{BoundaryCondition, BoundaryData, FaceValue};

use crate::error::{CliError, CliResult};

const AXES: [&str; 3] = ["x", "y", "z"];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn axis_index(name: &str) -> CliResult<usize> {
    AXES.iter()
        .position(|&a| a == name)
        .ok_or_else(|| usage(format!("unknown axis `{name}` (expected x, y or z)")))
}

/// `50x100` or `128x64x8`.
pub fn parse_size(s: &str) -> CliResult<Vec<usize>> {
    let dims = s
        .split('x')
        .map(|d| {
            d.parse::<usize>()
                .map_err(|_| usage(format!("bad size `{s}`")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if !(2..=3).contains(&dims.len()) {
        return Err(usage(format!("size `{s}` must have 2 or 3 extents")));
    }
    Ok(dims)
}

/// `x=periodic,y=dirichlet-neumann`, or a single name for every axis.
pub fn parse_bcs(s: &str, ndim: usize) -> CliResult<Vec<BoundaryCondition>> {
    if !s.contains('=') {
        let bc = s
            .parse::<BoundaryCondition>()
            .map_err(|e| usage(e.to_string()))?;
        return Ok(vec![bc; ndim]);
    }
    let mut out: Vec<Option<BoundaryCondition>> = vec![None; ndim];
    for item in s.split(',') {
        let (axis, name) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("expected axis=bc, got `{item}`")))?;
        let i = axis_index(axis)?;
        if i >= ndim {
            return Err(usage(format!(
                "axis `{axis}` does not exist in a {ndim}D problem"
            )));
        }
        if out[i].is_some() {
            return Err(usage(format!("axis `{axis}` given twice")));
        }
        out[i] = Some(
            name.parse()
                .map_err(|e: kronpcg::Error| usage(e.to_string()))?,
        );
    }
    out.into_iter()
        .enumerate()
        .map(|(i, bc)| {
            bc.ok_or_else(|| usage(format!("no boundary condition for axis `{}`", AXES[i])))
        })
        .collect()
}

/// `x=-0.5`
pub fn parse_axis_value(s: &str) -> CliResult<(usize, f64)> {
    let (axis, v) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("expected axis=value, got `{s}`")))?;
    let v = v
        .parse::<f64>()
        .map_err(|_| usage(format!("bad value in `{s}`")))?;
    Ok((axis_index(axis)?, v))
}

/// Boundary data from the `--uB/--uE/--eB/--eE` flag lists.
pub fn boundary_data(
    ndim: usize,
    u_begin: &[String],
    u_end: &[String],
    e_begin: &[String],
    e_end: &[String],
) -> CliResult<BoundaryData> {
    let mut bd = BoundaryData::none(ndim);
    let groups: [(&[String], bool, fn(f64) -> FaceValue); 4] = [
        (u_begin, true, FaceValue::Potential),
        (u_end, false, FaceValue::Potential),
        (e_begin, true, FaceValue::Field),
        (e_end, false, FaceValue::Field),
    ];
    for (items, begin, kind) in groups {
        for item in items {
            let (axis, v) = parse_axis_value(item)?;
            if axis >= ndim {
                return Err(usage(format!(
                    "axis in `{item}` does not exist in a {ndim}D problem"
                )));
            }
            let pair = &bd.axes[axis];
            if (begin && pair.begin.is_some()) || (!begin && pair.end.is_some()) {
                return Err(usage(format!("face value for `{item}` given twice")));
            }
            if begin {
                bd.set_begin(axis, kind(v));
            } else {
                bd.set_end(axis, kind(v));
            }
        }
    }
    Ok(bd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryCondition::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("50x100").unwrap(), vec![50, 100]);
        assert_eq!(parse_size("128x64x8").unwrap(), vec![128, 64, 8]);
        assert!(parse_size("50").is_err());
        assert!(parse_size("5xq").is_err());
    }

    #[test]
    fn bc_grammar() {
        assert_eq!(
            parse_bcs("x=periodic,y=dirichlet-neumann", 2).unwrap(),
            vec![Periodic, DirichletNeumann]
        );
        assert_eq!(parse_bcs("neumann", 3).unwrap(), vec![Neumann; 3]);
        assert!(parse_bcs("x=periodic", 2).is_err());
        assert!(parse_bcs("x=periodic,x=neumann", 2).is_err());
        assert!(parse_bcs("x=periodic,z=neumann", 2).is_err());
        assert!(parse_bcs("x=robin,y=periodic", 2).is_err());
    }

    #[test]
    fn boundary_flags() {
        let bd = boundary_data(2, &["x=0".into()], &[], &[], &["x=-0.5".into()]).unwrap();
        assert_eq!(bd.axes[0].begin, Some(FaceValue::Potential(0.0)));
        assert_eq!(bd.axes[0].end, Some(FaceValue::Field(-0.5)));
        assert!(boundary_data(2, &["x=0".into()], &[], &["x=1".into()], &[]).is_err());
        assert!(boundary_data(2, &["z=0".into()], &[], &[], &[]).is_err());
    }
}
