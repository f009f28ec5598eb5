//! Reading and writing documents.

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};

use crate::ast::{Kind, RulemlNode};
use crate::grammar::validate;
use crate::RulemlError;

/// Namespace of every element.
pub const NAMESPACE: &str = "urn:ecalp:eca-ruleml";

/// Parses and validates a document.
pub fn parse_eca_ruleml(xml: &str) -> Result<RulemlNode, RulemlError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<RulemlNode> = Vec::new();
    let mut root = None;
    loop {
        let pos = reader.buffer_position();
        let xml_err = |e: &dyn std::fmt::Display| RulemlError::Xml(format!("at byte {pos}: {e}"));
        match reader.read_event().map_err(|e| xml_err(&e))? {
            Event::Start(e) => stack.push(open(&e).map_err(|e| xml_err(&e))?),
            Event::Empty(e) => {
                let node = open(&e).map_err(|e| xml_err(&e))?;
                close(node, &mut stack, &mut root).map_err(|e| xml_err(&e))?;
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| xml_err(&"unbalanced end tag"))?;
                close(node, &mut stack, &mut root).map_err(|e| xml_err(&e))?;
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| xml_err(&e))?;
                append_text(&mut stack, &text).map_err(|e| xml_err(&e))?;
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t).into_owned();
                append_text(&mut stack, &text).map_err(|e| xml_err(&e))?;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(RulemlError::Xml("unclosed element at end of input".into()));
    }
    let root = root.ok_or_else(|| RulemlError::Xml("document has no root element".into()))?;
    validate(&root)?;
    Ok(root)
}

fn open(e: &BytesStart<'_>) -> Result<RulemlNode, String> {
    let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
    let kind = Kind::from_name(&name).ok_or_else(|| format!("unknown element <{name}>"))?;
    let mut node = RulemlNode::new(kind, Vec::new());
    for attr in e.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| e.to_string())?.into_owned();
        if key == "xmlns" {
            if value != NAMESPACE {
                return Err(format!("unknown namespace {value}"));
            }
        } else if !key.starts_with("xmlns:") {
            node.attrs.push((key, value));
        }
    }
    Ok(node)
}

fn close(node: RulemlNode, stack: &mut [RulemlNode], root: &mut Option<RulemlNode>) -> Result<(), String> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(node),
        None if root.is_none() => *root = Some(node),
        None => return Err("more than one root element".into()),
    }
    Ok(())
}

fn append_text(stack: &mut [RulemlNode], text: &str) -> Result<(), String> {
    match stack.last_mut() {
        Some(node) if node.kind.is_leaf() => {
            node.text.push_str(text);
            Ok(())
        }
        Some(node) => Err(format!("text inside <{}>", node.kind)),
        None => Err("text outside the root element".into()),
    }
}

/// Writes a validated node as an indented document.
pub fn emit_eca_ruleml(node: &RulemlNode) -> Result<String, RulemlError> {
    validate(node)?;
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    let io = |e: std::io::Error| RulemlError::Xml(e.to_string());
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None))).map_err(io)?;
    write_node(&mut w, node, true).map_err(io)?;
    let mut out = String::from_utf8(w.into_inner()).expect("utf-8 output");
    out.push('\n');
    Ok(out)
}

fn write_node(w: &mut Writer<Vec<u8>>, node: &RulemlNode, root: bool) -> std::io::Result<()> {
    let name = node.kind.name();
    let mut start = BytesStart::new(name);
    if root {
        start.push_attribute(("xmlns", NAMESPACE));
    }
    for (k, v) in &node.attrs {
        start.push_attribute((k.as_str(), v.as_str()));
    }
    if node.children.is_empty() && node.text.is_empty() {
        return w.write_event(Event::Empty(start));
    }
    w.write_event(Event::Start(start))?;
    if node.kind.is_leaf() {
        w.write_event(Event::Text(BytesText::new(&node.text)))?;
    }
    for c in &node.children {
        write_node(w, c, false)?;
    }
    w.write_event(Event::End(BytesEnd::new(name)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<ECA xmlns="urn:ecalp:eca-ruleml">
  <event><Cterm><Ctor>ping</Ctor></Cterm></event>
  <action><Cterm><Ctor>pong</Ctor><Var>X</Var></Cterm></action>
</ECA>"#;

    #[test]
    fn minimal_rule_round_trips() {
        let node = parse_eca_ruleml(MINIMAL).unwrap();
        let text = emit_eca_ruleml(&node).unwrap();
        assert_eq!(parse_eca_ruleml(&text).unwrap(), node);
        assert_eq!(emit_eca_ruleml(&parse_eca_ruleml(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn text_is_escaped() {
        let node = RulemlNode::new(
            Kind::Plex,
            vec![RulemlNode::leaf(Kind::Data, "a<b & \"c\"")],
        );
        let text = emit_eca_ruleml(&node).unwrap();
        assert_eq!(parse_eca_ruleml(&text).unwrap(), node);
    }

    #[test]
    fn malformed_xml_is_reported() {
        assert!(matches!(parse_eca_ruleml("<ECA><action>"), Err(RulemlError::Xml(_))));
        assert!(matches!(parse_eca_ruleml("<ECA></Sequence>"), Err(RulemlError::Xml(_))));
        assert!(matches!(parse_eca_ruleml("<Bogus/>"), Err(RulemlError::Xml(_))));
        assert!(matches!(parse_eca_ruleml("<Ind xmlns=\"urn:other\">a</Ind>"), Err(RulemlError::Xml(_))));
    }

    #[test]
    fn missing_action_is_a_grammar_error() {
        let err = parse_eca_ruleml("<ECA><event><Ind>e</Ind></event></ECA>").unwrap_err();
        assert!(matches!(err, RulemlError::Grammar { .. }));
    }

    #[test]
    fn emit_rejects_invalid_nodes() {
        let periodic = RulemlNode::new(Kind::Periodic, vec![RulemlNode::leaf(Kind::Data, "5")]);
        assert!(emit_eca_ruleml(&periodic).is_err());
    }

    #[test]
    fn attributes_survive() {
        let node = RulemlNode::leaf(Kind::Data, "7").with_attr("type", "integer");
        let back = parse_eca_ruleml(&emit_eca_ruleml(&node).unwrap()).unwrap();
        assert_eq!(back.attr("type"), Some("integer"));
    }
}
