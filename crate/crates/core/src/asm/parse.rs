//! Operand-level parsing: registers, numbers, label expressions, memory operands.

use super::ErrorKind;

/// ABI register names indexed by register number.
pub const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5",
    "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
];

pub(super) fn parse_reg(s: &str) -> Result<u8, ErrorKind> {
    let s = s.trim();
    if let Some(n) = s.strip_prefix('x') {
        if let Ok(v) = n.parse::<u8>() {
            if v < 32 {
                return Ok(v);
            }
        }
    }
    if s == "fp" {
        return Ok(8);
    }
    ABI_NAMES
        .iter()
        .position(|&n| n == s)
        .map(|i| i as u8)
        .ok_or_else(|| ErrorKind::BadOperand(format!("expected register, found {s:?}")))
}

pub(super) fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim_start()),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(&h.replace('_', ""), 16).ok()?
    } else if let Some(b) = body.strip_prefix("0b").or_else(|| body.strip_prefix("0B")) {
        i64::from_str_radix(&b.replace('_', ""), 2).ok()?
    } else if !body.is_empty() && body.chars().all(|c| c.is_ascii_digit() || c == '_') {
        body.replace('_', "").parse::<i64>().ok()?
    } else {
        return None;
    };
    Some(if neg { -v } else { v })
}

pub(super) fn parse_imm(s: &str) -> Result<i64, ErrorKind> {
    parse_int(s).ok_or_else(|| ErrorKind::BadOperand(format!("expected integer, found {:?}", s.trim())))
}

pub(super) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

/// A label, `label±constant`, or a plain number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) enum Expr {
    Num(i64),
    Sym(String, i64),
}

pub(super) fn parse_expr(s: &str) -> Result<Expr, ErrorKind> {
    let s = s.trim();
    if let Some(v) = parse_int(s) {
        return Ok(Expr::Num(v));
    }
    let split = s.char_indices().skip(1).find(|&(_, c)| c == '+' || c == '-').map(|(i, _)| i);
    let (name, off) = match split {
        Some(i) => {
            let off = parse_int(&s[i..]).ok_or_else(|| {
                ErrorKind::BadOperand(format!("bad offset in expression {s:?}"))
            })?;
            (s[..i].trim(), off)
        }
        None => (s, 0),
    };
    if !is_ident(name) {
        return Err(ErrorKind::BadOperand(format!("expected label or number, found {s:?}")));
    }
    Ok(Expr::Sym(name.to_string(), off))
}

/// `imm(reg)` or, when `post_inc`, `imm(reg!)`.
pub(super) fn parse_mem(s: &str, post_inc: bool) -> Result<(i64, u8), ErrorKind> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| ErrorKind::BadOperand(format!("expected imm(reg), found {s:?}")))?;
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| ErrorKind::BadOperand(format!("unterminated memory operand {s:?}")))?
        .trim();
    let (reg, bang) = match inner.strip_suffix('!') {
        Some(r) => (r, true),
        None => (inner, false),
    };
    if bang != post_inc {
        let msg = if post_inc {
            format!("post-increment form needs imm(reg!), found {s:?}")
        } else {
            format!("'!' is only valid on p.* post-increment accesses: {s:?}")
        };
        return Err(ErrorKind::BadOperand(msg));
    }
    let imm_txt = s[..open].trim();
    let imm = if imm_txt.is_empty() { 0 } else { parse_imm(imm_txt)? };
    Ok((imm, parse_reg(reg)?))
}

/// Splits a line into mnemonic and comma-separated operands.
pub(super) fn split_operands(rest: &str) -> Vec<String> {
    if rest.trim().is_empty() {
        return Vec::new();
    }
    rest.split(',').map(|s| s.trim().to_string()).collect()
}

pub(super) fn strip_comment(line: &str) -> &str {
    let cut = [line.find('#'), line.find("//"), line.find(';')].into_iter().flatten().min();
    match cut {
        Some(i) => &line[..i],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registers() {
        assert_eq!(parse_reg("x10").unwrap(), 10);
        assert_eq!(parse_reg("a0").unwrap(), 10);
        assert_eq!(parse_reg("t6").unwrap(), 31);
        assert_eq!(parse_reg("fp").unwrap(), 8);
        assert!(parse_reg("x32").is_err());
        assert!(parse_reg("q1").is_err());
    }

    #[test]
    fn numbers_and_exprs() {
        assert_eq!(parse_int("-0x10"), Some(-16));
        assert_eq!(parse_int("0b101"), Some(5));
        assert_eq!(parse_int("1_000"), Some(1000));
        assert_eq!(parse_int("abc"), None);
        assert_eq!(parse_expr("loop+8").unwrap(), Expr::Sym("loop".into(), 8));
        assert_eq!(parse_expr("loop - 4").unwrap(), Expr::Sym("loop".into(), -4));
        assert_eq!(parse_expr("-12").unwrap(), Expr::Num(-12));
    }

    #[test]
    fn memory_operands() {
        assert_eq!(parse_mem("4(x8!)", true).unwrap(), (4, 8));
        assert_eq!(parse_mem("-8(sp)", false).unwrap(), (-8, 2));
        assert_eq!(parse_mem("(a0)", false).unwrap(), (0, 10));
        assert!(parse_mem("4(x8)", true).is_err());
        assert!(parse_mem("4(x8!)", false).is_err());
    }

    #[test]
    fn comments() {
        assert_eq!(strip_comment("add x1, x2, x3 # sum"), "add x1, x2, x3 ");
        assert_eq!(strip_comment("// whole line"), "");
    }
}
