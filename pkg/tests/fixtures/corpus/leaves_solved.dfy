datatype Tree = Leaf | Node(left: Tree, right: Tree)
function method Size(t: Tree): nat
{ if t.Leaf? then 1 else Size(t.left) + Size(t.right) }
        
method Main() {
  var tl:Tree := Leaf;
  var tc:Tree := Node(Node(Leaf, Leaf),Leaf);
  assert Size(tl) == 1;
  assert Size(tc) == 3;
  print "  ",Size(tl),"  ",Size(tc), "\n";

}
