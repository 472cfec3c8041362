"""Upper stable dimension package"""
