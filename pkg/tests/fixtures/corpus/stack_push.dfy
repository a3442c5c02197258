method push(i : int)
  requires Valid()
  ensures Valid()
  modifies Repr
  ensures capacity == old(capacity)
{
}
