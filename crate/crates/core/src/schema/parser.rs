//! Recursive descent parser for the schema language.

use crate::error::{Error, Result};
use crate::lex::{tokenize, Cursor, TokenKind};

use super::{build_model, ClassDef, ClassModel, FieldDecl, FieldKind, MethodDef, Statement, Stmt};

/// Parse and validate a schema, returning the resolved class model.
pub fn parse_schema(text: &str) -> Result<ClassModel> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut classes = Vec::new();
    while !cur.at_eof() {
        classes.push(parse_class(&mut cur)?);
    }
    build_model(classes)
}

fn parse_class(cur: &mut Cursor) -> Result<ClassDef> {
    let pos = cur.expect_keyword("class")?;
    let (name, _) = cur.expect_ident("class name")?;
    let name = name.to_string();
    let mut supers = Vec::new();
    if cur.eat_keyword("inherits") {
        loop {
            let (s, _) = cur.expect_ident("superclass name")?;
            supers.push(s.to_string());
            if !cur.eat(TokenKind::Comma) {
                break;
            }
        }
    }
    cur.expect(TokenKind::LBrace, "`{`")?;

    let mut fields = Vec::new();
    if cur.eat_keyword("fields") {
        cur.expect(TokenKind::LBrace, "`{`")?;
        while !cur.eat(TokenKind::RBrace) {
            fields.push(parse_field(cur)?);
        }
    }

    let mut methods = Vec::new();
    while cur.eat_keyword("method") {
        methods.push(parse_method(cur)?);
    }
    cur.expect(TokenKind::RBrace, "`}`")?;

    Ok(ClassDef {
        name,
        supers,
        fields,
        methods,
        pos,
    })
}

fn parse_field(cur: &mut Cursor) -> Result<FieldDecl> {
    let (name, pos) = cur.expect_ident("field name")?;
    let name = name.to_string();
    cur.expect(TokenKind::Colon, "`:`")?;
    let (ty, ty_pos) = cur.expect_ident("field type")?;
    let kind = match ty {
        "int" => FieldKind::Int,
        "bool" => FieldKind::Bool,
        "float" => FieldKind::Float,
        "string" => FieldKind::Str,
        "ref" => {
            let (target, _) = cur.expect_ident("referenced class name")?;
            FieldKind::Ref(target.to_string())
        }
        other => {
            return Err(Error::Syntax {
                pos: ty_pos,
                msg: format!("unknown field type `{other}`"),
            });
        }
    };
    cur.expect(TokenKind::Semi, "`;`")?;
    Ok(FieldDecl { name, kind, pos })
}

fn parse_method(cur: &mut Cursor) -> Result<MethodDef> {
    let (name, pos) = cur.expect_ident("method name")?;
    let name = name.to_string();
    cur.expect(TokenKind::LBrace, "`{`")?;
    let mut body = Vec::new();
    while !cur.eat(TokenKind::RBrace) {
        body.push(parse_stmt(cur)?);
    }
    Ok(MethodDef { name, body, pos })
}

fn parse_stmt(cur: &mut Cursor) -> Result<Stmt> {
    let (head, pos) = cur.expect_ident("statement")?;
    let node = match head {
        "use" => {
            cur.expect(TokenKind::LParen, "`(`")?;
            let reads = parse_ident_list(cur)?;
            cur.expect(TokenKind::RParen, "`)`")?;
            cur.expect(TokenKind::Semi, "`;`")?;
            Statement::Use { reads }
        }
        "send" => {
            let (first, _) = cur.expect_ident("method name")?;
            if cur.eat(TokenKind::Dot) {
                // send CLASS.METHOD to self;
                let (method, _) = cur.expect_ident("method name")?;
                cur.expect_keyword("to")?;
                cur.expect_keyword("self")?;
                cur.expect(TokenKind::Semi, "`;`")?;
                Statement::PrefixedSend {
                    class: first.to_string(),
                    method: method.to_string(),
                }
            } else {
                cur.expect_keyword("to")?;
                let (target, _) = cur.expect_ident("`self` or field name")?;
                cur.expect(TokenKind::Semi, "`;`")?;
                if target == "self" {
                    Statement::SelfSend {
                        method: first.to_string(),
                    }
                } else {
                    Statement::FieldSend {
                        field: target.to_string(),
                        method: first.to_string(),
                    }
                }
            }
        }
        _ => {
            // IDENT := expr(reads...);
            cur.expect(TokenKind::Assign, "`:=`")?;
            cur.expect_keyword("expr")?;
            cur.expect(TokenKind::LParen, "`(`")?;
            let reads = if cur.peek().kind == TokenKind::RParen {
                Vec::new()
            } else {
                parse_ident_list(cur)?
            };
            cur.expect(TokenKind::RParen, "`)`")?;
            cur.expect(TokenKind::Semi, "`;`")?;
            Statement::Assign {
                target: head.to_string(),
                reads,
            }
        }
    };
    Ok(Stmt { node, pos })
}

fn parse_ident_list(cur: &mut Cursor) -> Result<Vec<String>> {
    let mut out = Vec::new();
    loop {
        let (name, _) = cur.expect_ident("identifier")?;
        out.push(name.to_string());
        if !cur.eat(TokenKind::Comma) {
            break;
        }
    }
    Ok(out)
}
