//! Pretty printer producing source the parser reads back to an equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(m: &ModuleDef) -> String {
    let mut out = String::new();
    let kind = match m.kind {
        ModuleKind::Data => "data",
        ModuleKind::Process => "process",
    };
    let _ = writeln!(out, "{kind} module {}", m.name.name);
    out.push_str("begin\n");
    if !m.parameters.is_empty() {
        out.push_str("parameters\n");
        for p in &m.parameters {
            let _ = writeln!(out, "  {}", p.name.name);
            out.push_str("  begin\n");
            print_decls(&mut out, &p.decls, "    ");
            let _ = writeln!(out, "  end {}", p.name.name);
        }
    }
    if !m.exports.is_empty() {
        out.push_str("exports\n");
        out.push_str("begin\n");
        print_decls(&mut out, &m.exports, "  ");
        out.push_str("end\n");
    }
    if !m.imports.is_empty() {
        out.push_str("imports\n");
        for (i, imp) in m.imports.iter().enumerate() {
            print_import(&mut out, imp);
            out.push_str(if i + 1 < m.imports.len() { ",\n" } else { "\n" });
        }
    }
    print_decls(&mut out, &m.hidden, "  ");
    if !m.sets.is_empty() {
        out.push_str("sets of atoms\n");
        for s in &m.sets {
            let _ = writeln!(
                out,
                "  {} = {}",
                s.name.name,
                set_literal(&s.members, &s.binders)
            );
        }
    }
    if !m.comms.is_empty() {
        out.push_str("communications\n");
        for c in &m.comms {
            let _ = write!(out, "  {} | {} = {}", atom(&c.a), atom(&c.b), atom(&c.result));
            if !c.binders.is_empty() {
                let _ = write!(out, "\n    for {}", binders(&c.binders));
            }
            out.push('\n');
        }
    }
    if !m.variables.is_empty() {
        out.push_str("variables\n");
        for v in &m.variables {
            let names: Vec<&str> = v.names.iter().map(|n| n.name.as_str()).collect();
            let _ = writeln!(out, "  {} : {}", names.join(", "), v.sort.name);
        }
    }
    if !m.definitions.is_empty() {
        out.push_str("definitions\n");
        for d in &m.definitions {
            let _ = write!(out, "  {}", d.name.name);
            if !d.params.is_empty() {
                let ps: Vec<&str> = d.params.iter().map(|p| p.name.as_str()).collect();
                let _ = write!(out, "({})", ps.join(", "));
            }
            let _ = writeln!(out, " =\n    {}", proc_to_string(&d.body));
        }
    }
    let _ = writeln!(out, "end {}", m.name.name);
    out
}

/// Prints several modules separated by blank lines.
pub fn pretty_print_all(mods: &[ModuleDef]) -> String {
    mods.iter().map(pretty_print).collect::<Vec<_>>().join("\n")
}

fn print_decls(out: &mut String, d: &Decls, indent: &str) {
    if !d.sorts.is_empty() {
        let _ = writeln!(out, "{indent}sorts\n{indent}  {}", idents(&d.sorts));
    }
    if !d.literals.is_empty() {
        let _ = writeln!(out, "{indent}literals\n{indent}  {}", idents(&d.literals));
    }
    if !d.functions.is_empty() {
        let _ = writeln!(out, "{indent}functions");
        for f in &d.functions {
            let args: Vec<&str> = f.args.iter().map(|a| a.name.as_str()).collect();
            if args.is_empty() {
                let _ = writeln!(out, "{indent}  {} : {}", f.name.name, f.result.name);
            } else {
                let _ = writeln!(
                    out,
                    "{indent}  {} : {} -> {}",
                    f.name.name,
                    args.join(" # "),
                    f.result.name
                );
            }
        }
    }
    for (kw, sigs) in [("atoms", &d.atoms), ("processes", &d.processes)] {
        if sigs.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{indent}{kw}");
        for s in sigs {
            let _ = writeln!(out, "{indent}  {}", sig(s));
        }
    }
}

fn sig(s: &SigDecl) -> String {
    if s.args.is_empty() {
        s.name.name.clone()
    } else {
        let args: Vec<&str> = s.args.iter().map(|a| a.name.as_str()).collect();
        format!("{} : {}", s.name.name, args.join(" # "))
    }
}

fn idents(ids: &[Ident]) -> String {
    ids.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ")
}

fn name_map(map: &[(Ident, Ident)]) -> String {
    let pairs: Vec<String> = map
        .iter()
        .map(|(a, b)| format!("{} -> {}", a.name, b.name))
        .collect();
    format!("[{}]", pairs.join(", "))
}

fn print_import(out: &mut String, imp: &ImportClause) {
    let _ = write!(out, "  {}", imp.module.name);
    if imp.bindings.is_empty() && imp.renamings.is_empty() {
        return;
    }
    out.push_str(" {\n");
    for b in &imp.bindings {
        let _ = writeln!(
            out,
            "    {} bound by {} to {}",
            b.section.name,
            name_map(&b.map),
            b.source.name
        );
    }
    if !imp.renamings.is_empty() {
        let _ = writeln!(out, "    renamed by {}", name_map(&imp.renamings));
    }
    out.push_str("  }");
}

fn binders(bs: &[Binder]) -> String {
    bs.iter()
        .map(|b| format!("{} in {}", b.var.name, b.sort.name))
        .collect::<Vec<_>>()
        .join(", ")
}

fn set_literal(members: &[RawAtom], bs: &[Binder]) -> String {
    let ms: Vec<String> = members.iter().map(atom).collect();
    let mut s = format!("{{ {}", ms.join(", "));
    if !bs.is_empty() {
        let _ = write!(s, " | {}", binders(bs));
    }
    s.push_str(" }");
    s
}

pub fn term_to_string(t: &RawTerm) -> String {
    let mut s = String::new();
    write_term(&mut s, t, false);
    s
}

fn write_term(out: &mut String, t: &RawTerm, right_of_shift: bool) {
    match t {
        RawTerm::App { name, args, .. } if name == ">>" && args.len() == 2 => {
            if right_of_shift {
                out.push('(');
            }
            write_term(out, &args[0], false);
            out.push_str(" >> ");
            write_term(out, &args[1], true);
            if right_of_shift {
                out.push(')');
            }
        }
        RawTerm::App { name, args, .. } => {
            out.push_str(name);
            write_term_args(out, args);
        }
        RawTerm::Int(n) => {
            let _ = write!(out, "{n}");
        }
        RawTerm::Placeholder(n) => {
            let _ = write!(out, "${n}");
        }
        RawTerm::Wildcard => out.push('_'),
    }
}

fn write_term_args(out: &mut String, args: &[RawTerm]) {
    if args.is_empty() {
        return;
    }
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_term(out, a, false);
    }
    out.push(')');
}

pub fn atom(a: &RawAtom) -> String {
    let mut s = a.name.clone();
    write_term_args(&mut s, &a.args);
    s
}

pub fn proc_to_string(p: &RawProc) -> String {
    let mut s = String::new();
    write_proc(&mut s, p, 0);
    s
}

// precedence: 0 = ||, 1 = +, 2 = ., 3 = *, 4 = primary
fn prec(p: &RawProc) -> u8 {
    match p {
        RawProc::Par(..) => 0,
        RawProc::Alt(..) => 1,
        RawProc::Seq(..) => 2,
        RawProc::Star(..) => 3,
        _ => 4,
    }
}

fn write_proc(out: &mut String, p: &RawProc, ctx: u8) {
    let paren = prec(p) < ctx;
    if paren {
        out.push('(');
    }
    match p {
        RawProc::Delta => out.push_str("delta"),
        RawProc::Skip => out.push_str("skip"),
        RawProc::Call(a) => out.push_str(&atom(a)),
        RawProc::Par(l, r) => {
            write_proc(out, l, 0);
            out.push_str(" || ");
            write_proc(out, r, 1);
        }
        RawProc::Alt(l, r) => {
            write_proc(out, l, 1);
            out.push_str(" + ");
            write_proc(out, r, 2);
        }
        RawProc::Seq(l, r) => {
            write_proc(out, l, 3);
            out.push_str(" . ");
            write_proc(out, r, 2);
        }
        RawProc::Star(l, r) => {
            write_proc(out, l, 3);
            out.push_str(" * ");
            write_proc(out, r, 4);
        }
        RawProc::Sum { var, sort, body } => {
            let _ = write!(out, "sum({} in {}, ", var.name, sort.name);
            write_proc(out, body, 0);
            out.push(')');
        }
        RawProc::Encaps(h, b) | RawProc::Hide(h, b) => {
            out.push_str(if matches!(p, RawProc::Encaps(..)) {
                "encaps("
            } else {
                "hide("
            });
            match h {
                RawSetRef::Named(n) => out.push_str(&n.name),
                RawSetRef::Inline(ms) => {
                    let ms: Vec<String> = ms.iter().map(atom).collect();
                    let _ = write!(out, "{{{}}}", ms.join(", "));
                }
            }
            out.push_str(", ");
            write_proc(out, b, 0);
            out.push(')');
        }
        RawProc::Disrupt(b, d) => {
            out.push_str("disrupt(");
            write_proc(out, b, 0);
            out.push_str(", ");
            write_proc(out, d, 0);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse_proc, parse_spec};

    #[test]
    fn delta_definition_prints_plainly() {
        let m = &parse_spec("process module M begin processes P definitions P = delta end M")
            .unwrap()[0];
        let text = pretty_print(m);
        assert!(text.contains("P =\n    delta"), "{text}");
        assert_eq!(parse_spec(&text).unwrap(), vec![m.clone()]);
    }

    #[test]
    fn nested_sums_round_trip() {
        let src = "sum(a in ID, sum(b in ID, x(a) . y(b)) + z) * delta";
        let p = parse_proc(src).unwrap();
        let printed = proc_to_string(&p);
        assert_eq!(parse_proc(&printed).unwrap(), p);
    }

    #[test]
    fn left_nested_sequence_keeps_parentheses() {
        let p = parse_proc("(a . b) . c").unwrap();
        assert_eq!(proc_to_string(&p), "(a . b) . c");
        let p = parse_proc("a || (b || c)").unwrap();
        assert_eq!(proc_to_string(&p), "a || (b || c)");
    }
}
