use super::TokenId;

#[derive(Debug, Clone, Default)]
struct Node {
    /// Sorted by byte.
    children: Vec<(u8, u32)>,
    token: Option<TokenId>,
}

/// Byte trie over the vocabulary; each token ends at exactly one node.
#[derive(Debug, Clone)]
pub struct TokenTrie {
    nodes: Vec<Node>,
}

impl TokenTrie {
    pub fn new<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut trie = TokenTrie {
            nodes: vec![Node::default()],
        };
        for (id, tok) in tokens.into_iter().enumerate() {
            let mut node = 0u32;
            for &b in tok.as_bytes() {
                node = match trie.child(node, b) {
                    Some(n) => n,
                    None => {
                        let next = trie.nodes.len() as u32;
                        trie.nodes.push(Node::default());
                        let children = &mut trie.nodes[node as usize].children;
                        let at = children.partition_point(|(c, _)| *c < b);
                        children.insert(at, (b, next));
                        next
                    }
                };
            }
            trie.nodes[node as usize].token.get_or_insert(id as TokenId);
        }
        trie
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn child(&self, node: u32, byte: u8) -> Option<u32> {
        let children = &self.nodes[node as usize].children;
        children
            .binary_search_by_key(&byte, |(c, _)| *c)
            .ok()
            .map(|i| children[i].1)
    }

    pub fn children(&self, node: u32) -> &[(u8, u32)] {
        &self.nodes[node as usize].children
    }

    pub fn token(&self, node: u32) -> Option<TokenId> {
        self.nodes[node as usize].token
    }

    /// Longest token that is a prefix of `bytes`, with its byte length.
    pub fn longest_match(&self, bytes: &[u8]) -> Option<(TokenId, usize)> {
        let mut node = self.root();
        let mut best = None;
        for (i, &b) in bytes.iter().enumerate() {
            match self.child(node, b) {
                Some(n) => node = n,
                None => break,
            }
            if let Some(t) = self.token(node) {
                best = Some((t, i + 1));
            }
        }
        best
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_token_has_one_path() {
        let vocab = ["a", "ab", "abc", "b", "é"];
        let trie = TokenTrie::new(vocab);
        for (id, tok) in vocab.iter().enumerate() {
            let mut node = trie.root();
            for &b in tok.as_bytes() {
                node = trie.child(node, b).unwrap();
            }
            assert_eq!(trie.token(node), Some(id as TokenId));
        }
        assert_eq!(trie.longest_match(b"abd"), Some((1, 2)));
        assert_eq!(trie.longest_match(b"x"), None);
    }
}
