function sum(tree) {
    if (tree == null)
        return 0;
    else
        return sum(tree.left) +
               sum(tree.right) +
               tree.val;
}

function makeTree(depth) {
    if (depth == 0)
        return null;
    else
        return { val: depth,
                 left: makeTree(depth-1),
                 right: makeTree(depth-1)
               };
}

var root = makeTree(8);
if (sum(root) != 502)
    throw Error('error');

function benchmarkRun() {
    return sum(makeTree(8));
}
