use super::{ConstituencyTree, Subtree, Token, TreebankError, PLACEHOLDER_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lexeme<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
}

fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push(Lexeme::Open(i));
                i += 1;
            }
            b')' => {
                out.push(Lexeme::Close(i));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b'(' | b')') && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                out.push(Lexeme::Atom(&text[start..i], start));
            }
        }
    }
    out
}

fn check_balance(lexemes: &[Lexeme<'_>]) -> Result<(), TreebankError> {
    let mut open: Vec<usize> = Vec::new();
    for lx in lexemes {
        match *lx {
            Lexeme::Open(at) => open.push(at),
            Lexeme::Close(at) => {
                if open.pop().is_none() {
                    return Err(TreebankError::UnbalancedBrackets { offset: at });
                }
            }
            Lexeme::Atom(..) => {}
        }
    }
    match open.first() {
        Some(&at) => Err(TreebankError::UnbalancedBrackets { offset: at }),
        None => Ok(()),
    }
}

struct Parser<'a> {
    lexemes: Vec<Lexeme<'a>>,
    pos: usize,
    tokens: Vec<Token>,
}

impl Parser<'_> {
    fn push_token(&mut self, surface: &str, tag: Option<String>) -> Subtree {
        let index = self.tokens.len();
        self.tokens.push(Token {
            index,
            surface: surface.to_string(),
            tag,
        });
        Subtree::Leaf(index)
    }

    // Called with `pos` on an Open lexeme.
    fn constituent(&mut self) -> Result<Subtree, TreebankError> {
        let open_at = match self.lexemes[self.pos] {
            Lexeme::Open(at) => at,
            _ => unreachable!(),
        };
        self.pos += 1;
        let label = match self.lexemes[self.pos] {
            Lexeme::Atom(a, _) => {
                self.pos += 1;
                Some(a.to_string())
            }
            _ => None,
        };
        let mut children = Vec::new();
        let mut bare_words = 0;
        loop {
            match self.lexemes[self.pos] {
                Lexeme::Close(_) => {
                    self.pos += 1;
                    break;
                }
                Lexeme::Open(_) => children.push(self.constituent()?),
                Lexeme::Atom(a, _) => {
                    self.pos += 1;
                    bare_words += 1;
                    children.push(self.push_token(a, None));
                }
            }
        }
        match children.len() {
            0 => Err(TreebankError::EmptyConstituent { offset: open_at }),
            // `(TAG word)` is a preterminal; the tag moves onto the token.
            1 if bare_words == 1 => {
                let leaf = children.pop().unwrap();
                if let Subtree::Leaf(i) = leaf {
                    self.tokens[i].tag = label;
                }
                Ok(leaf)
            }
            _ => Ok(Subtree::Node { label, children }),
        }
    }
}

/// Reads one tree in parenthesized form, e.g. `(S (NP (DT the) (NN dog)) (VP barks))`.
///
/// A bracket holding a single bare word is a preterminal and its label becomes
/// the token's tag. Brackets without a label are allowed.
pub fn parse_bracketed(text: &str) -> Result<ConstituencyTree, TreebankError> {
    let lexemes = lex(text);
    check_balance(&lexemes)?;
    let first = match lexemes.first() {
        None => return Err(TreebankError::NoTokens { offset: text.len() }),
        Some(lx) => *lx,
    };
    let mut parser = Parser {
        lexemes,
        pos: 0,
        tokens: Vec::new(),
    };
    let root = match first {
        Lexeme::Atom(a, _) => {
            parser.pos = 1;
            parser.push_token(a, None)
        }
        Lexeme::Open(_) => parser.constituent()?,
        Lexeme::Close(at) => return Err(TreebankError::UnbalancedBrackets { offset: at }),
    };
    if let Some(lx) = parser.lexemes.get(parser.pos) {
        let at = match *lx {
            Lexeme::Open(a) | Lexeme::Close(a) | Lexeme::Atom(_, a) => a,
        };
        return Err(TreebankError::TrailingInput { offset: at });
    }
    Ok(ConstituencyTree::from_subtree(parser.tokens, &root))
}

/// Writes the tree on a single line. Unlabeled internal nodes get the
/// placeholder label `X`; tagged tokens are written as `(TAG word)`.
pub fn serialize_bracketed(tree: &ConstituencyTree) -> String {
    fn leaf(tree: &ConstituencyTree, i: usize, out: &mut String) {
        let tok = &tree.tokens()[i];
        match &tok.tag {
            Some(tag) => {
                out.push('(');
                out.push_str(tag);
                out.push(' ');
                out.push_str(&tok.surface);
                out.push(')');
            }
            None => out.push_str(&tok.surface),
        }
    }
    fn go(tree: &ConstituencyTree, id: usize, out: &mut String) {
        let node = &tree.nodes()[id];
        if node.is_leaf() {
            leaf(tree, node.start, out);
            return;
        }
        out.push('(');
        out.push_str(node.label.as_deref().unwrap_or(PLACEHOLDER_LABEL));
        for &c in &node.children {
            out.push(' ');
            go(tree, c, out);
        }
        out.push(')');
    }
    let mut out = String::new();
    let root = tree.root();
    if root.is_leaf() && tree.tokens()[0].tag.is_none() {
        out.push('(');
        out.push_str(PLACEHOLDER_LABEL);
        out.push(' ');
        out.push_str(&tree.tokens()[0].surface);
        out.push(')');
    } else {
        go(tree, 0, &mut out);
    }
    out
}
